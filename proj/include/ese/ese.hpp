#pragma once

#include "cli.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "design.hpp"
#include "dynamics.hpp"
#include "estimators.hpp"
#include "graphgen.hpp"
#include "harness.hpp"
#include "panel.hpp"
#include "rng.hpp"

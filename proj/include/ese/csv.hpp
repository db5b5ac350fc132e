#pragma once

// Panel CSV files: header `unit,round,value`, one row per (unit, round).
// Units are 0-based. Outcome files include round 0; treatment and exposure
// files start at round 1. Values are written in shortest round-trip form.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "panel.hpp"

namespace ese::csv {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument(context + ": cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline std::size_t parse_index(std::string_view s, const std::string& context) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument(context + ": cannot parse index '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline void write_outcomes(std::ostream& os, const OutcomePanel& p) {
  os << "unit,round,value\n";
  for (std::size_t i = 0; i < p.n_units(); ++i)
    for (Round t = 0; t <= p.n_rounds(); ++t) os << i << ',' << t << ',' << format_double(p.at(i, t)) << '\n';
}

inline void write_treatments(std::ostream& os, const TreatmentPanel& p) {
  os << "unit,round,value\n";
  for (std::size_t i = 0; i < p.n_units(); ++i)
    for (Round t = 1; t <= p.n_rounds(); ++t) os << i << ',' << t << ',' << p.at(i, t) << '\n';
}

inline void write_exposures(std::ostream& os, const ExposureMatrix& p) {
  os << "unit,round,value\n";
  for (std::size_t i = 0; i < p.n_units(); ++i)
    for (Round t = 1; t <= p.n_rounds(); ++t) os << i << ',' << t << ',' << format_double(p.at(i, t)) << '\n';
}

namespace detail {

struct Cells {
  std::size_t n_units = 0;
  Round max_round = 0;
  Round min_round = 0;
  std::map<std::pair<std::size_t, Round>, double> values;
};

inline Cells read_cells(std::istream& is, const std::string& name) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "unit,round,value") throw std::invalid_argument(name + ": expected header 'unit,round,value'");
  Cells c;
  bool first = true;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string ctx = name + ":" + std::to_string(lineno);
    auto f = split(line);
    if (f.size() != 3) throw std::invalid_argument(ctx + ": expected 3 fields");
    auto unit = parse_index(f[0], ctx);
    auto round = parse_index(f[1], ctx);
    auto value = parse_double(f[2], ctx);
    if (!c.values.emplace(std::pair{unit, round}, value).second) {
      throw std::invalid_argument(ctx + ": duplicate (unit, round) key (" + std::to_string(unit) + ", " +
                                  std::to_string(round) + ")");
    }
    c.n_units = std::max(c.n_units, unit + 1);
    c.max_round = first ? round : std::max(c.max_round, round);
    c.min_round = first ? round : std::min(c.min_round, round);
    first = false;
  }
  if (c.values.empty()) throw std::invalid_argument(name + ": no rows");
  return c;
}

inline double cell(const Cells& c, std::size_t i, Round t, const std::string& name) {
  auto it = c.values.find({i, t});
  if (it == c.values.end()) {
    throw std::invalid_argument(name + ": missing (unit, round) = (" + std::to_string(i) + ", " +
                                std::to_string(t) + ")");
  }
  return it->second;
}

}  // namespace detail

inline OutcomePanel read_outcomes(std::istream& is, const std::string& name = "outcomes") {
  auto c = detail::read_cells(is, name);
  if (c.min_round != 0) throw std::invalid_argument(name + ": outcome panel must include round 0");
  if (c.max_round < 1) throw std::invalid_argument(name + ": outcome panel needs at least one treated round");
  const Round T = c.max_round;
  if (c.values.size() != c.n_units * (T + 1)) throw std::invalid_argument(name + ": incomplete panel");
  std::vector<double> e(c.n_units * (T + 1));
  for (std::size_t i = 0; i < c.n_units; ++i)
    for (Round t = 0; t <= T; ++t) e[i * (T + 1) + t] = detail::cell(c, i, t, name);
  return build_panel(c.n_units, T, std::move(e));
}

inline TreatmentPanel read_treatments(std::istream& is, const std::string& name = "treatments") {
  auto c = detail::read_cells(is, name);
  if (c.min_round != 1) throw std::invalid_argument(name + ": treatment rounds start at 1");
  const Round T = c.max_round;
  if (c.values.size() != c.n_units * T) throw std::invalid_argument(name + ": incomplete panel");
  std::vector<std::uint8_t> e(c.n_units * T);
  for (std::size_t i = 0; i < c.n_units; ++i) {
    for (Round t = 1; t <= T; ++t) {
      double v = detail::cell(c, i, t, name);
      if (v != 0.0 && v != 1.0) throw std::invalid_argument(name + ": treatment values must be 0 or 1");
      e[i * T + (t - 1)] = static_cast<std::uint8_t>(v);
    }
  }
  return {c.n_units, T, std::move(e)};
}

inline OutcomePanel read_outcomes_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_outcomes(in, path);
}

inline TreatmentPanel read_treatments_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_treatments(in, path);
}

}  // namespace ese::csv

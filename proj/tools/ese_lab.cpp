#include <iostream>

#include "ese/cli.hpp"

int main(int argc, char** argv) { return ese::run_cli(argc, argv, std::cout, std::cerr); }

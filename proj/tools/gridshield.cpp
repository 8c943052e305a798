#include <iostream>

#include "gridshield/cli.hpp"

int main(int argc, char** argv) { return gridshield::cli::run_main(argc, argv, std::cout, std::cerr); }

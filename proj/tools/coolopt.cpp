#include <iostream>

#include "coolopt/cli.hpp"

int main(int argc, char** argv) { return coolopt::run_cli(argc, argv, std::cout, std::cerr); }

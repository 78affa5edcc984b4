#include <iostream>

#include "stlgm/cli.hpp"

int main(int argc, char** argv) { return stlgm::run_cli(argc, argv, std::cout, std::cerr); }

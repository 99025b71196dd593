#include <iostream>

#include "roiforge/cli.hpp"

int main(int argc, char** argv) { return roiforge::run_cli(argc, argv, std::cout, std::cerr); }

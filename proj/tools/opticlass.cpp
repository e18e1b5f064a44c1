#include <iostream>

#include "opticlass/cli.hpp"

int main(int argc, char** argv) { return opticlass::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "spcboot/cli.hpp"

int main(int argc, char** argv) { return spcboot::run_cli(argc, argv, std::cin, std::cout, std::cerr); }

#include <iostream>

#include "homent/cli.hpp"

int main(int argc, char** argv) { return homent::run_cli(argc, argv, std::cout, std::cerr); }

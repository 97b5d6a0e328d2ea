#include <iostream>

#include "vvtri/cli.hpp"

int main(int argc, char** argv) { return vv::cli::run_cli(argc, argv, std::cout, std::cerr); }

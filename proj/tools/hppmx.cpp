#include <iostream>

#include "hppmx/cli.hpp"

int main(int argc, char** argv) { return hppmx::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "refid/cli.hpp"

int main(int argc, char** argv) { return refid::cli::run(argc, argv, std::cin, std::cout, std::cerr); }

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return n2f::cli::run(argc, argv, std::cout, std::cerr); }

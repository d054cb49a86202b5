#include <iostream>

#include "pmag/cli.hpp"

int main(int argc, char** argv) { return pmag::cli::run(argc, argv, std::cout, std::cerr); }

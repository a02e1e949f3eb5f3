#include <iostream>

#include "levyavg/cli.hpp"

int main(int argc, char** argv) { return levyavg::cli::run(argc, argv, std::cout, std::cerr); }

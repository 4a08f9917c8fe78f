#include "hhsplit/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hhsplit::cli::run(argc, argv, std::cout, std::cerr); }

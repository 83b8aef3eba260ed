#include <iostream>

#include "emaint/cli.hpp"

int main(int argc, char** argv) { return emaint::run_cli(argc, argv, std::cout, std::cerr); }

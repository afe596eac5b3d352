#include <iostream>

#include "graphdiff/commands.hpp"

int main(int argc, char **argv) { return graphdiff::run_cli(argc, argv, std::cout, std::cerr); }

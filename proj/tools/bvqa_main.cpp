#include <iostream>

#include "bvqa/cli.hpp"

int main(int argc, char** argv) { return bvqa::run_cli(argc, argv, std::cout, std::cerr); }

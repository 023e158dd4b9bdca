#include <iostream>

#include "aerograph/interface/cli.hpp"

int main(int argc, char** argv) { return aerograph::run_cli(argc, argv, std::cout, std::cerr); }

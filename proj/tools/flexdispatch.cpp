#include <iostream>

#include "flex/cli.hpp"

int main(int argc, char** argv) { return flex::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "dcc/commands.hpp"

int main(int argc, char** argv) { return dcc::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "photocool/cli.hpp"

int main(int argc, char** argv) { return photocool::run_cli(argc, argv, std::cout, std::cerr); }

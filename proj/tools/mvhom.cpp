#include <iostream>

#include "mvhom/commands.hpp"

int main(int argc, char** argv) { return mvhom::run_cli(argc, argv, std::cout, std::cerr); }

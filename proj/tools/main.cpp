#include "soundgrid/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return soundgrid::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "voxelfield/cli.hpp"

int main(int argc, char** argv) { return voxelfield::run(argc, argv, std::cout, std::cerr); }

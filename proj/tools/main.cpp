#include "lab.hpp"

#include <iostream>

int main(int argc, char** argv) { return cwp::lab::run_cli(argc, argv, std::cout, std::cerr); }

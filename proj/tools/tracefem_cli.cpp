#include "tracefem/experiment.hpp"

#include <iostream>

int main(int argc, char** argv) { return tracefem::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "flockhydro/app.hpp"

int main(int argc, char** argv) { return flockhydro::run_cli(argc, argv, std::cout, std::cerr); }

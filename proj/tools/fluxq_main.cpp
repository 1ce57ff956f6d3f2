#include "fluxq/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return fluxq::cli::main_entry(argc, argv, std::cout, std::cerr); }

#include "urllc/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return urllc::cli::run(argc, argv, std::cout, std::cerr); }

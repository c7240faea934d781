#include <iostream>

#include "pemadm/cli.hpp"

int main(int argc, char** argv) { return pemadm::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "odm/cli.hpp"

int main(int argc, char** argv) { return odm::cli::run(argc, argv, {std::cout, std::cerr}); }

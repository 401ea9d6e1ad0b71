#include <iostream>

#include "temprompt/cli.hpp"

int main(int argc, char **argv) { return temprompt::cli::run(argc, argv, std::cout, std::cerr); }

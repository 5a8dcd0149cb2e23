#include <iostream>

#include "mrbess/cli.hpp"

int main(int argc, char** argv) { return mrbess::cli::main_entry(argc, argv, std::cout, std::cerr); }

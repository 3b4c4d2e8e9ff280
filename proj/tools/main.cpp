#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return unibench::cli::run_cli(argc, argv, std::cout, std::cerr);
}

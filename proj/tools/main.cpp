#include "femplex/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return femplex::cli::main_with_args(argc, argv, std::cout, std::cerr);
}

#include <iostream>

#include "gebd/cli.hpp"
#include "gebd/runtime.hpp"

int main(int argc, char** argv) {
    gebd::tune_allocator();
    return gebd::run_cli(argc, argv, std::cout, std::cerr);
}

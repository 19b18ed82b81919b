#include <iostream>
#include <string>
#include <vector>

#include "uncharted/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return uncharted::cli::run(args, std::cout, std::cerr);
}

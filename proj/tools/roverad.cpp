#include <iostream>
#include <string>
#include <vector>

#include "roverad/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    return roverad::run_cli(args, std::cout, std::cerr);
}

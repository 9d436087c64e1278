#include <iostream>
#include <string>
#include <vector>

#include "tap/pipeline.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return tap::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "lcmid/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return lcmid::run(args, std::cout, std::cerr);
}

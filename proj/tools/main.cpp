#include <iostream>
#include <string>
#include <vector>

#include "lesiongrade/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return lesiongrade::run_cli(args, std::cout, std::cerr);
}

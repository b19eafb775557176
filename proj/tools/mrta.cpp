// SPDX-License-Identifier: Apache-2.0
#include <mrta/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv, argv + argc);
    return mrta::run_cli(args, std::cin, std::cout, std::cerr);
}

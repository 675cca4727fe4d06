#include <iostream>
#include <string>
#include <vector>

#include "fpd/cli.h"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fpd::cli_dispatch(args, std::cout, std::cerr);
}

#include <iostream>

#include "cxrssl/cli.hpp"

int main(int argc, char** argv) {
    return cxrssl::cli::run(std::vector<std::string>(argv, argv + argc), {std::cout, std::cerr});
}

#include <iostream>
#include <string>
#include <vector>

#include "nhaze/cli.hpp"

int main(int argc, char** argv) {
    return nhaze::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

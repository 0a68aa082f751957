#include <iostream>

#include "cli_app.hpp"

int main(int argc, char** argv) {
    return recagent::cli::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}

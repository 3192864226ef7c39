#include <iostream>

#include "ssm/cli.hpp"

int main(int argc, char** argv) { return ssm::run_cli(argc, argv, std::cout, std::cerr); }

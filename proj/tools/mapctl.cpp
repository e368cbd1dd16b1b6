#include <iostream>

#include "mobagent/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mobagent::cli::run_cli(args, std::cout, std::cerr);
}

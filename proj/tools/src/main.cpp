#include <iostream>

#include "nvt/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nvt::cli::run_cli(args, std::cout, std::cerr);
}

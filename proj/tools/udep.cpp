#include <iostream>
#include <vector>

#include "udep/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return udep::cli::run_cli(std::move(args), std::cout, std::cerr);
}

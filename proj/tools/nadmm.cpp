#include <iostream>
#include <string>
#include <vector>

#include "nadmm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return nadmm::cli::run(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "lasso/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lasso::run_cli(args, std::cout, std::cerr);
}

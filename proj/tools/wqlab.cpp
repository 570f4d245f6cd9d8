#include <iostream>
#include <string>
#include <vector>

#include "wqlab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return wqlab::run(args, std::cout, std::cerr);
}

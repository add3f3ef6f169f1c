#include <iostream>
#include <string>
#include <vector>

#include "protattn/service.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return protattn::run_cli(args, std::cout, std::cerr);
}

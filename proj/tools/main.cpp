#include <iostream>
#include <string>
#include <vector>

#include "stratreg/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return stratreg::cli::dispatch(args, std::cout, std::cerr);
}

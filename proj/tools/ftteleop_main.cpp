#include <iostream>
#include <string>
#include <vector>

#include "ftteleop/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return ftteleop::run_command(args, std::cout, std::cerr);
}

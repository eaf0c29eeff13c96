#include <iostream>
#include <string>
#include <vector>

#include "enkfcal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return enkfcal::run_cli(args, std::cout, std::cerr);
}

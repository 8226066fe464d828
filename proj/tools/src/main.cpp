#include <iostream>

#include "lensloop_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lensloop::cli::dispatch(args, std::cout, std::cerr);
}

#include <iostream>

#include "fbf/cli.hpp"

int main(int argc, char** argv) {
  return fbf::cli::run_cli(argc, argv, std::cout, std::cerr);
}

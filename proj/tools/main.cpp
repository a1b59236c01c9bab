#include <iostream>

#include "setgen/cli.hpp"

int main(int argc, char** argv) {
  return setgen::run_cli(argc, argv, std::cout, std::cerr);
}

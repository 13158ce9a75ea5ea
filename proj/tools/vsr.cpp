#include "vsr/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return vsr::cli::run(argc, argv, std::cout, std::cerr);
}

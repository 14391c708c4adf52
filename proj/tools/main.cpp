#include <iostream>

#include "arguq/cli.hpp"

int main(int argc, char** argv) {
  return arguq::cli::run_cli(argc, argv, std::cout, std::cerr);
}

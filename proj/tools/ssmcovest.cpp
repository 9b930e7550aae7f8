#include <iostream>

#include "ssmcovest/experiments/cli.hpp"

int main(int argc, char** argv) {
  return ssmcovest::experiments::cli_main(argc, argv, std::cout, std::cerr);
}

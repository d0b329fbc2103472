#include <iostream>

#include "greybox/cli.h"

int main(int argc, char** argv) {
  return greybox::run_cli(argc, argv, std::cout, std::cerr);
}

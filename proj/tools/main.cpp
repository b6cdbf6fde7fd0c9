#include <iostream>

#include "dipm/cli.hpp"

int main(int argc, char** argv) {
  return dipm::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

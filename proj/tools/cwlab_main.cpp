#include <iostream>
#include <string>
#include <vector>

#include "cwlab/cli.hpp"

int main(int argc, char** argv) {
  return cwlab::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

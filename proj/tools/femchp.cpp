#include <iostream>
#include <string>
#include <vector>

#include "femchp/cli.hpp"

int main(int argc, char** argv) {
  return femchp::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

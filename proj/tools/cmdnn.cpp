#include <iostream>

#include "cmdnn/commands.hpp"

int main(int argc, char** argv) {
  return cmdnn::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

#include <iostream>

#include "ehd/cli.hpp"

int main(int argc, char** argv) {
  return ehd::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

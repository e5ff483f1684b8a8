#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return mgst::cli::run_command({argv + 1, argv + argc}, std::cout, std::cerr);
}

#include <iostream>

#include "cli.hpp"
#include "heap_tuning.hpp"

int main(int argc, char** argv) {
  eli::cli::keep_heap_resident();
  return eli::cli::run_cli(argc, argv, std::cout, std::cerr);
}

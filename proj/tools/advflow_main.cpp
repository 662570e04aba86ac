#include <iostream>

#include "advflow/runtime.hpp"
#include "cli.hpp"

int main(int argc, char** argv) {
  advflow::tune_allocator();
  return advflow::cli::run(argc, argv, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "actscore/app/cli.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || std::string(argv[1]) == "--help" || std::string(argv[1]) == "-h") {
    std::cerr << actscore::app::usage();
    return argc < 2 ? 2 : 0;
  }
  return actscore::app::dispatch(argv[1], std::vector<std::string>(argv + 2, argv + argc));
}

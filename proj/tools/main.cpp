#include <iostream>

#include "bbconic/cli.hpp"

int main(int argc, char** argv) {
  int code = 0;
  const auto cfg = bbconic::parse_args(argc, argv, code, std::cout, std::cerr);
  if (!cfg) return code;
  return bbconic::run(*cfg, std::cout, std::cerr);
}

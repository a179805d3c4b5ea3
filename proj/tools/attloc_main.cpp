#include <string>
#include <vector>

#include "attloc/cli.hpp"

int main(int argc, char** argv) {
  return attloc::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}

#include <vector>

#include "dart/cli.hpp"

int main(int argc, char** argv) {
  return dart::run_command(std::vector<std::string>(argv + 1, argv + argc));
}

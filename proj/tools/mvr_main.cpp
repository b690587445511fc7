#include <string>
#include <vector>

#include "mvr/cli.hpp"

int main(int argc, char** argv) {
  return mvr::run(std::vector<std::string>(argv + 1, argv + argc));
}

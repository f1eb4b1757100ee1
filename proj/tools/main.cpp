#include <string>
#include <vector>

#include "openess/manifest.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return openess::run_cli(args);
}

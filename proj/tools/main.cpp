#include <string>
#include <vector>

#include "thermoscope/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return thermoscope::run_cli(args);
}

#include <string>
#include <vector>

#include "roleswarm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return rsw::cli::run(args);
}

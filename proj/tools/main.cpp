#include <string>
#include <vector>

#include "mpguard/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return mpguard::cli::dispatch(args);
}

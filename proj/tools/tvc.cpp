#include <string>
#include <vector>

#include "tvc/cli.hpp"

int main(int argc, char** argv) {
    return tvc::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}

#include <string>
#include <vector>

#include "hct/cli.hpp"

int main(int argc, char** argv) {
    return hct::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}

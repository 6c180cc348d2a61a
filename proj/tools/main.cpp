#include "easteer/cli.hpp"

int main(int argc, char** argv) {
    return easteer::run_cli(std::vector<std::string>(argv, argv + argc));
}

#include "semsr/cli.hpp"

int main(int argc, char** argv) { return semsr::run_cli(argc, argv); }

#include "driftbench/cli.hpp"

int main(int argc, char** argv) { return driftbench::cli_dispatch(argc, argv); }

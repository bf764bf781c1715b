#include "cli.hpp"

int main(int argc, char** argv) { return stitch3d_cli::run_cli(argc, argv); }

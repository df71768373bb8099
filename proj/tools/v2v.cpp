#include "v2v/cli.hpp"

int main(int argc, char** argv) { return v2v::cli::run_cli(argc, argv); }

#include "g2lab/cli.hpp"

int main(int argc, char** argv) { return g2lab::cli::cli_main(argc, argv); }

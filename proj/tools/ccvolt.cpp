#include "ccvolt/cli.hpp"

int main(int argc, char** argv) { return ccvolt::cli::run(argc, argv); }

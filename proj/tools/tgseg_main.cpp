#include "tgseg/cli/cli.hpp"

int main(int argc, char** argv) { return tgseg::cli::run(argc, argv); }

#include "mir/cli.hpp"

int main(int argc, char** argv) { return mir::cli::run(argc, argv); }

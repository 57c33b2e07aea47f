#include "waitk/cli/commands.hpp"

int main(int argc, char** argv) { return waitk::cli::run(argc, argv); }

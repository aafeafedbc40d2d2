#include "crossnet/cli.hpp"

int main(int argc, char** argv) { return crossnet::cli::main(argc, argv); }

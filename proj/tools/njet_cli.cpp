#include "njet/cli.hpp"

int main(int argc, char** argv) { return njet::cli::run(argc, argv); }

// photmol - command-line driver; see `photmol --help`.

#include "photmol/cli.hpp"

int main(int argc, char** argv) { return photmol::cli::main_entry(argc, argv); }

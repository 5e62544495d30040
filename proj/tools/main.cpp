#include "kasr/cli.hpp"

int main(int argc, char** argv) { return kasr::cli::main_entry(argc, argv); }

#include "cli.hpp"

int main(int argc, char** argv) { return cgt::cli::main_entry(argc, argv); }

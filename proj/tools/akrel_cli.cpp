#include "akrel/cli.hpp"

int main(int argc, char** argv) { return akrel::cli::main(argc, argv); }

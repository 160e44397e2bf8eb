#include "fsrc/cli.hpp"

int main(int argc, char** argv) { return fsrc::run_cli(argc, argv); }

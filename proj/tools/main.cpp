#include "pel/cli.hpp"

int main(int argc, char** argv) { return pel::run_cli(argc, argv); }

#include "bubbletower/cli.hpp"

int main(int argc, char** argv) { return bt::run_cli(argc, argv); }

#include "ibrscan/cli.hpp"

int main(int argc, char** argv) { return ibrscan::run_cli(argc, argv); }

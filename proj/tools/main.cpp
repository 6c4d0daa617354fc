#include "cbrec/cli.hpp"

int main(int argc, char** argv) { return cbrec::run_cli(argc, argv); }

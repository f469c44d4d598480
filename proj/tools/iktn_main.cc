#include "iktn/cli.h"

int main(int argc, char** argv) { return iktn::RunCli(argc, argv); }

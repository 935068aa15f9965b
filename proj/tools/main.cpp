#include "facc/cli.hpp"

int main(int argc, char** argv) { return facc::cli_main(argc, argv); }

#include "pcsimp/cli.hpp"

int main(int argc, char** argv) { return pcs::cli_main(argc, argv); }

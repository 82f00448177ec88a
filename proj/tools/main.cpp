#include "dexgrasp/cli.hpp"

int main(int argc, char** argv) { return dexgrasp::cli_dispatch(argc, argv); }

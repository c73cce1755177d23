#include "fairpath/cli.hpp"

int main(int argc, char** argv) { return fairpath::cli::cli_main(argc, argv); }

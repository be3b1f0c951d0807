#include "credsets/cli.hpp"

int main(int argc, char** argv) { return credsets::cli_main(argc, argv); }

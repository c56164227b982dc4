#include "pbql/cli.hpp"

int main(int argc, char** argv) { return pbql::cli_main(argc, argv); }

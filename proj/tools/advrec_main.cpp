#include "cli.hpp"

int main(int argc, char** argv) { return advrec::cli::run_cli(argc, argv); }

#include "ckmr/cli.hpp"

int main(int argc, char** argv) { return ckmr::run_cli(argc, argv); }

#include "dcqa/cli.hpp"

int main(int argc, char** argv) { return dcqa::run_cli(argc, argv); }

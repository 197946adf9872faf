#include "rbmlab/cli.hpp"

int main(int argc, char** argv) { return rbmlab::cli::run(argc, argv); }

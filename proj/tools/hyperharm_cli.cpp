#include "hyperharm/cli.hpp"

int main(int argc, char** argv) { return hyperharm::cli::dispatch(argc, argv); }

#include "starid/cli.hpp"

int main(int argc, char **argv) { return starid::cli::dispatch(argc, argv); }

#include "loopcoord/cli.hpp"

int main(int argc, char** argv) { return loopcoord::cli::dispatch(argc, argv); }

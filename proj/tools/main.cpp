#include "cb2/cli.hpp"

int main(int argc, char** argv) { return cb2::cli::dispatch(argc, argv); }

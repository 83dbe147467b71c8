#include "groupkit/cli.hpp"

int main(int argc, char** argv) { return groupkit::cli::dispatch(argc, argv); }

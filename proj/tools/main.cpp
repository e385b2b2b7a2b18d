#include "mapfilter/cli.hpp"

int main(int argc, char** argv) { return mapfilter::cli::run(argc, argv); }

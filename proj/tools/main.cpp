#include "cli.hpp"

int main(int argc, char** argv) { return awe::cli::run(argc, argv); }

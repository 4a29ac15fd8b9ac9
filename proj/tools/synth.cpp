#include "fosyn/cli.hpp"

int main(int argc, char** argv) { return fosyn::cli::run(argc, argv); }

#include "cli.hpp"

int main(int argc, char** argv) { return acfclust::cli::run(argc, argv); }

#include "sparsefactor/cli.hpp"

int main(int argc, char** argv) { return sfm::cli::run(argc, argv); }

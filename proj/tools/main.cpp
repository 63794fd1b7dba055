#include "fracpile/cli.hpp"

int main(int argc, char** argv) { return fracpile::cli::run(argc, argv); }

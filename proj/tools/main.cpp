#include "cli.hpp"

int main(int argc, char** argv) { return deepsep::cli::run(argc, argv); }

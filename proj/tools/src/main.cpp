#include "cli.hpp"

int main(int argc, char** argv) { return ssad::tools::run_cli(argc, argv); }

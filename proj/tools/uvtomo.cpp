#include "uvtomo/cli.hpp"

int main(int argc, char** argv) { return uvtomo::run_cli(argc, argv); }

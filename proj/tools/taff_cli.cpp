#include "tissue_affordance/cli.hpp"

int main(int argc, char** argv) { return taff::run_cli(argc, argv); }

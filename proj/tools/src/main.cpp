#include "aghq_cli/cli.hpp"

int main(int argc, char** argv) { return aghq::cli::run(argc, argv); }

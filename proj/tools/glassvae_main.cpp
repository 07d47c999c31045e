#include "glassvae/cli.hpp"

int main(int argc, char** argv) { return glassvae::cli::run(argc, argv); }

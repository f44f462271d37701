#include "npw/cli.hpp"

int main(int argc, char** argv) { return npw::cli::run(argc, argv); }

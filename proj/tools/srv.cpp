#include "srv/cli.hpp"

int main(int argc, char** argv) { return srv::cli::main(argc, argv); }

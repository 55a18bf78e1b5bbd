#include "emgtl/cli.hpp"

int main(int argc, char** argv) { return emgtl::cli::main(argc, argv); }

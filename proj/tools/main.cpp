#include "nlmx/runner.hpp"

int main(int argc, char** argv) { return nlmx::cli_main(argc, argv); }

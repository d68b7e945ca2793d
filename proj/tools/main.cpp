#include "exwave/harness.hpp"

int main(int argc, char** argv) { return exwave::run_cli(argc, argv); }

#include "mcinf/bench.hpp"

int main(int argc, char** argv) { return mcinf::bench::cli_main(argc, argv); }

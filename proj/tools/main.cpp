#include "illiq/cli.hpp"

int main(int argc, char** argv) { return illiq::run_cli(argc, argv); }

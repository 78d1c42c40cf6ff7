#include "cli.hpp"

int main(int argc, char** argv) { return ssn::cli::run(argc, argv); }

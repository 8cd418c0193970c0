#include "cli_entry.hpp"

int main(int argc, char** argv) { return selfnet::cli::run(argc, argv); }

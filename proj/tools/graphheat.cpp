#include "commands.hpp"

int main(int argc, char** argv) { return graphheat::cli::main_entry(argc, argv); }

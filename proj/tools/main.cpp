#include "asyncmic/commands.hpp"

int main(int argc, char** argv) { return asyncmic::cli::run(argc, argv); }

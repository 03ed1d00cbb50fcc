#include <imbfc/cli.hpp>

int main(int argc, char** argv) { return imbfc::cli::run(argc, argv); }

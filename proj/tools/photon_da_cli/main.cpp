// Command-line front end; all behavior lives in the library's command layer
// so it can be exercised by tests without spawning processes.
#include "photon_da/commands.hpp"

int main(int argc, char** argv) { return photon_da::run_cli(argc, argv); }

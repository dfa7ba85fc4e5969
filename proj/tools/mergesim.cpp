#include "../src/cli_app.hpp"

int main(int argc, char** argv) { return mergesim::run_cli(argc, argv); }

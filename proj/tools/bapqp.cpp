#include <bapqp/cli.hpp>

int main(int argc, char** argv) { return bapqp::run_cli(argc, argv); }

#include <mapomdp/cli.hpp>

int main(int argc, char** argv) { return mapomdp::cli::run_cli(argc, argv); }

#include "hjbqvi/cli.hpp"

int main(int argc, char** argv) { return hjbqvi::run_command(argc, argv); }

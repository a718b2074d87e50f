#include "crmort/cli.hpp"

int main(int argc, char** argv) { return crmort::cli::run(argc, argv); }

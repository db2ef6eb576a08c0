#include "eced/cli.hpp"

int main(int argc, char** argv) { return eced::dispatch(argc, argv); }

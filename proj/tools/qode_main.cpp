#include "qode/cli.hpp"

int main(int argc, char** argv) { return qode::dispatch(argc, argv); }

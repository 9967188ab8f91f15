#include <iostream>

#include "serprobe/cli/app.hpp"

int main(int argc, char** argv) { return serprobe::cli::run(argc, argv, std::cout, std::cerr); }

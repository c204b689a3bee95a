#include <iostream>

#include "histcal_cli.hpp"

int main(int argc, char** argv) { return histcal::cli::run(argc, argv, std::cout, std::cerr); }

#include "shom/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return shom::run_cli(argc, argv, std::cout, std::cerr);
}

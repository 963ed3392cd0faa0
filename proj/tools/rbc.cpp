#include <iostream>

#include "rbc/cli.hpp"

int main(int argc, char** argv)
{
    return rbc::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

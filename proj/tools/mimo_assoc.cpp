#include "mimo/commands.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv)
{
    return mimo::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

#include <iostream>
#include "rosgas/analysis.hpp"
#include "rosgas/io.hpp"
int main() { std::cout << "stub\n"; return 0; }

#include <iostream>
int main(int argc, char**){ std::cout << "stub\n"; return 0; }

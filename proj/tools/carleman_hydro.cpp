#include <cstdio>

int main() {
    std::puts("carleman-hydro: CLI under construction");
    return 0;
}

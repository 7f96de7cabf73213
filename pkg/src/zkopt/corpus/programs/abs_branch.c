#include "zkrt.h"

#ifndef N
#define N 512
#endif

int abs_i32_branchy(int x)
{
    if (x < 0)
        return -x;
    return x;
}

int main(void)
{
    unsigned seed = 12345, total = 0;
    for (int i = 0; i < N; i++) {
        seed = seed * 1103515245u + 12345u;
        total += (unsigned)abs_i32_branchy((int)seed >> 8);
    }
    zk_print("abs_branch: ");
    zk_print_u32(total);
    zk_print("\n");
    return 0;
}

#include "zkrt.h"

#ifndef N
#define N 512
#endif

int div(int x)
{
    return x / 8;
}

int main(void)
{
    int total = 0;
    for (int i = -N; i < N; i++)
        total += div(i * 37);
    zk_print("div8: ");
    zk_print_u32((unsigned)total);
    zk_print("\n");
    return 0;
}

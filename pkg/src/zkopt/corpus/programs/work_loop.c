/* A small hot function called from a loop; a natural inlining target. */
#include "zkrt.h"

#ifndef N
#define N 200
#endif

typedef unsigned long long u64;

u64 work(u64 x)
{
    u64 sum = x;
    for (u64 j = 0; j < 100; j++)
        sum = sum * 31 + j;
    return sum;
}

int main(void)
{
    u64 acc = 0;
    for (unsigned i = 0; i < N; i++)
        acc ^= work(i);
    zk_print("work_loop: ");
    zk_print_hex((unsigned)(acc >> 32));
    zk_print_hex((unsigned)acc);
    zk_print("\n");
    return 0;
}

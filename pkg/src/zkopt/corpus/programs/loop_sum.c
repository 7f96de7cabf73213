#include "zkrt.h"

#ifndef N
#define N 1000
#endif

int main(void)
{
    unsigned sum = 0;
    for (unsigned i = 0; i < N; i++)
        sum += i;
    zk_print("loop_sum: ");
    zk_print_u32(sum);
    zk_print("\n");
    return 0;
}

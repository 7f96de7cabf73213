#include "zkrt.h"

#ifndef N
#define N 4096
#endif

int a[N], b[N];

int main(void)
{
    int i;
    for (i = 0; i < N; i++) {
        a[i] = 1;
        b[i] = 2;
    }
    zk_print("fission_fused: ");
    zk_print_u32((unsigned)(a[N - 1] + b[N / 2]));
    zk_print("\n");
    return 0;
}

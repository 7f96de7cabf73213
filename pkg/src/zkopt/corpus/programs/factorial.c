#include "zkrt.h"

#ifndef N
#define N 12
#endif
#ifndef REPS
#define REPS 50
#endif

static unsigned fact(unsigned n)
{
    if (n <= 1)
        return 1;
    return n * fact(n - 1);
}

int main(void)
{
    unsigned acc = 0;
    for (unsigned r = 0; r < REPS; r++)
        acc += fact(N) ^ r;
    zk_print("factorial: ");
    zk_print_u32(acc);
    zk_print("\n");
    return 0;
}

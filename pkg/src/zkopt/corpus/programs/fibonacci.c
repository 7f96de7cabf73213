#include "zkrt.h"

#ifndef N
#define N 16
#endif

static unsigned fib_rec(unsigned n)
{
    return n < 2 ? n : fib_rec(n - 1) + fib_rec(n - 2);
}

static unsigned fib_iter(unsigned n)
{
    unsigned a = 0, b = 1;
    while (n--) {
        unsigned t = a + b;
        a = b;
        b = t;
    }
    return a;
}

int main(void)
{
    unsigned r = fib_rec(N);
    unsigned i = fib_iter(N * 4);
    zk_print("fibonacci: ");
    zk_print_u32(r);
    zk_print(" ");
    zk_print_u32(i);
    zk_print("\n");
    return r == fib_iter(N) ? 0 : 1;
}

/* Many scalar locals kept in stack slots until promoted to registers. */
#include "zkrt.h"

#ifndef N
#define N 300
#endif

int main(void)
{
    unsigned a = 1, b = 2, c = 3, d = 4, e = 5, f = 6;
    for (unsigned i = 0; i < N; i++) {
        a += i;
        b ^= a;
        c += b >> 1;
        d = d * 3 + c;
        e += d & 0xff;
        f ^= e + i;
    }
    zk_print("spill: ");
    zk_print_u32(a ^ b ^ c ^ d ^ e ^ f);
    zk_print("\n");
    return 0;
}

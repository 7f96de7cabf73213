/* Writes one word per 1 KB page; the paging cost dominates everything else. */
#include "zkrt.h"

#ifndef PAGES
#define PAGES 16
#endif

unsigned buf[PAGES * 256] __attribute__((aligned(1024)));

int main(void)
{
    for (unsigned p = 0; p < PAGES; p++)
        buf[p * 256] = p + 1;
    unsigned sum = 0;
    for (unsigned p = 0; p < PAGES; p++)
        sum += buf[p * 256];
    zk_print("store_stride: ");
    zk_print_u32(sum);
    zk_print("\n");
    return 0;
}

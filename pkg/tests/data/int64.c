#include "zkrt.h"
volatile unsigned long long A = 0xfedcba9876543210ULL, B = 0x12345ULL;
volatile long long SA = -0x123456789abcLL, SB = 977;
volatile int K[] = {0, 1, 31, 32, 33, 63};
int main(void)
{
    unsigned long long a = A, b = B;
    long long sa = SA, sb = SB;
    for (int i = 0; i < 6; i++) {
        int k = K[i];
        unsigned long long v[3] = {a >> k, a << k, (unsigned long long)(sa >> k)};
        for (int j = 0; j < 3; j++) { zk_print_hex((unsigned)(v[j] >> 32)); zk_print_hex((unsigned)v[j]); zk_print(" "); }
    }
    unsigned long long w[4] = {a / b, a % b, (unsigned long long)(sa / sb), (unsigned long long)(sa % sb)};
    for (int j = 0; j < 4; j++) { zk_print_hex((unsigned)(w[j] >> 32)); zk_print_hex((unsigned)w[j]); zk_print(" "); }
    zk_print("\n");
    return 0;
}

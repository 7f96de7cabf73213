#include "zkrt.h"

#ifdef __riscv
typedef unsigned long size_t;

int main(void);

__attribute__((noreturn, section(".text.start"))) void _start(void)
{
    zk_exit(main());
}

void zk_exit(int code)
{
    zk_ecall3(ZK_SYS_EXIT, code, 0, 0);
    __builtin_unreachable();
}

long zk_write(const void *buf, unsigned long len)
{
    return zk_ecall3(ZK_SYS_WRITE, 1, (long)buf, (long)len);
}

void *memset(void *dst, int c, size_t n)
{
    unsigned char *d = dst;
    while (n--)
        *d++ = (unsigned char)c;
    return dst;
}

void *memcpy(void *dst, const void *src, size_t n)
{
    unsigned char *d = dst;
    const unsigned char *s = src;
    while (n--)
        *d++ = *s++;
    return dst;
}

void *memmove(void *dst, const void *src, size_t n)
{
    unsigned char *d = dst;
    const unsigned char *s = src;
    if (d < s) {
        while (n--)
            *d++ = *s++;
    } else {
        d += n;
        s += n;
        while (n--)
            *--d = *--s;
    }
    return dst;
}

int memcmp(const void *a, const void *b, size_t n)
{
    const unsigned char *x = a, *y = b;
    for (; n; n--, x++, y++)
        if (*x != *y)
            return *x - *y;
    return 0;
}

/* 64-bit helpers that size-optimized code calls instead of inlining.
   Built from 32-bit halves so they cannot lower to calls to themselves. */
typedef union {
    unsigned long long all;
    struct { unsigned lo, hi; } s;
} dw;

unsigned long long __lshrdi3(unsigned long long a, int b)
{
    dw x = {a}, r;
    if (b & 32) {
        r.s.hi = 0;
        r.s.lo = x.s.hi >> (b & 31);
    } else if (b == 0) {
        return a;
    } else {
        r.s.hi = x.s.hi >> b;
        r.s.lo = (x.s.hi << (32 - b)) | (x.s.lo >> b);
    }
    return r.all;
}

unsigned long long __ashldi3(unsigned long long a, int b)
{
    dw x = {a}, r;
    if (b & 32) {
        r.s.lo = 0;
        r.s.hi = x.s.lo << (b & 31);
    } else if (b == 0) {
        return a;
    } else {
        r.s.lo = x.s.lo << b;
        r.s.hi = (x.s.hi << b) | (x.s.lo >> (32 - b));
    }
    return r.all;
}

long long __ashrdi3(long long a, int b)
{
    dw x = {(unsigned long long)a}, r;
    if (b & 32) {
        r.s.hi = (unsigned)((int)x.s.hi >> 31);
        r.s.lo = (unsigned)((int)x.s.hi >> (b & 31));
    } else if (b == 0) {
        return a;
    } else {
        r.s.hi = (unsigned)((int)x.s.hi >> b);
        r.s.lo = (x.s.hi << (32 - b)) | (x.s.lo >> b);
    }
    return (long long)r.all;
}

/* restoring division, one quotient bit per step */
unsigned long long __udivmoddi4(unsigned long long n, unsigned long long d, unsigned long long *rem)
{
    dw q = {0}, r = {0}, nn = {n}, dd = {d};
    if (dd.all == 0) {
        if (rem)
            *rem = n;
        return ~0ULL;
    }
    for (int i = 63; i >= 0; i--) {
        /* r = (r << 1) | bit i of n */
        unsigned bit = i >= 32 ? (nn.s.hi >> (i - 32)) & 1 : (nn.s.lo >> i) & 1;
        r.s.hi = (r.s.hi << 1) | (r.s.lo >> 31);
        r.s.lo = (r.s.lo << 1) | bit;
        if (r.s.hi > dd.s.hi || (r.s.hi == dd.s.hi && r.s.lo >= dd.s.lo)) {
            unsigned borrow = r.s.lo < dd.s.lo;
            r.s.lo -= dd.s.lo;
            r.s.hi -= dd.s.hi + borrow;
            if (i >= 32)
                q.s.hi |= 1u << (i - 32);
            else
                q.s.lo |= 1u << i;
        }
    }
    if (rem)
        *rem = r.all;
    return q.all;
}

unsigned long long __udivdi3(unsigned long long a, unsigned long long b)
{
    return __udivmoddi4(a, b, 0);
}

unsigned long long __umoddi3(unsigned long long a, unsigned long long b)
{
    unsigned long long r;
    __udivmoddi4(a, b, &r);
    return r;
}

long long __divdi3(long long a, long long b)
{
    int neg = (a < 0) != (b < 0);
    unsigned long long q = __udivmoddi4(a < 0 ? 0 - (unsigned long long)a : (unsigned long long)a,
                                        b < 0 ? 0 - (unsigned long long)b : (unsigned long long)b, 0);
    return neg ? (long long)(0 - q) : (long long)q;
}

long long __moddi3(long long a, long long b)
{
    unsigned long long r;
    __udivmoddi4(a < 0 ? 0 - (unsigned long long)a : (unsigned long long)a,
                 b < 0 ? 0 - (unsigned long long)b : (unsigned long long)b, &r);
    return a < 0 ? (long long)(0 - r) : (long long)r;
}
#else
#include <stdlib.h>
#include <unistd.h>

void zk_exit(int code)
{
    exit(code);
}

long zk_write(const void *buf, unsigned long len)
{
    return write(1, buf, len);
}
#endif

void zk_print(const char *s)
{
    unsigned long n = 0;
    while (s[n])
        n++;
    zk_write(s, n);
}

void zk_print_u32(unsigned int v)
{
    char buf[12];
    int i = 11;
    buf[i] = 0;
    do {
        buf[--i] = (char)('0' + v % 10);
        v /= 10;
    } while (v);
    zk_write(buf + i, 11 - i);
}

void zk_print_hex(unsigned int v)
{
    char buf[8];
    for (int i = 7; i >= 0; i--) {
        unsigned d = v & 15;
        buf[i] = (char)(d < 10 ? '0' + d : 'a' + d - 10);
        v >>= 4;
    }
    zk_write(buf, 8);
}

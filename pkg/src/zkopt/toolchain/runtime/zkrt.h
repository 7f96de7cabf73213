/* Minimal guest runtime: exit, write and a few printing helpers.
 * On RISC-V the calls are environment calls; on the host they map to libc so
 * the same corpus sources can be timed natively. */
#ifndef ZKRT_H
#define ZKRT_H

#ifdef __riscv
#define ZK_SYS_WRITE 64
#define ZK_SYS_EXIT 93

static inline long zk_ecall3(long n, long a0, long a1, long a2)
{
    register long r_a0 __asm__("a0") = a0;
    register long r_a1 __asm__("a1") = a1;
    register long r_a2 __asm__("a2") = a2;
    register long r_a7 __asm__("a7") = n;
    __asm__ volatile("ecall" : "+r"(r_a0) : "r"(r_a1), "r"(r_a2), "r"(r_a7) : "memory");
    return r_a0;
}
#endif

void zk_exit(int code) __attribute__((noreturn));
long zk_write(const void *buf, unsigned long len);
void zk_print(const char *s);
void zk_print_u32(unsigned int v);
void zk_print_hex(unsigned int v);

/* keeps a value alive without letting the optimizer see through it */
#define ZK_KEEP(x) __asm__ volatile("" : : "r"(x) : "memory")

#endif

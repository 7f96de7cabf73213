/* Four-deep nest storing a constant into a stack array.
 * Loops are written the way a `for x in 0..N` range loop lowers: the counter
 * lives in a range object that a non-inlined next() call advances. */
#include "zkrt.h"

#ifndef N
#define N 8
#endif

struct range { int cur, end; };
struct next { int some, val; };

__attribute__((noinline)) static struct next range_next(struct range *r)
{
    struct next o = {0, 0};
    if (r->cur < r->end) {
        o.some = 1;
        o.val = r->cur++;
    }
    return o;
}

int main(void)
{
    int v[N][N][N][N];
    struct range rk = {0, N};
    for (struct next ok; (ok = range_next(&rk)).some;) {
        int k = ok.val;
        struct range rj = {0, N};
        for (struct next oj; (oj = range_next(&rj)).some;) {
            int j = oj.val;
            struct range ri = {0, N};
            for (struct next oi; (oi = range_next(&ri)).some;) {
                int i = oi.val;
                struct range rl = {0, N};
                for (struct next ol; (ol = range_next(&rl)).some;) {
                    int l = ol.val;
                    v[k][j][i][l] = 42;
                }
            }
        }
    }
    unsigned sum = 0;
    for (int k = 0; k < N; k++)
        sum += (unsigned)v[k][k][k][k];
    zk_print("licm_nest4: ");
    zk_print_u32(sum);
    zk_print("\n");
    return 0;
}

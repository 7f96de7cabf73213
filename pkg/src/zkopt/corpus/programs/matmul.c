/* 5x5 matrix-vector product in fixed point (the guest has no FPU). */
#include "zkrt.h"

#ifndef REPS
#define REPS 40
#endif

void matmul(const int mat[5][5], const int vec[5], int res[5])
{
    for (int row = 0; row < 5; row++)
        res[row] = 0;
    for (int col = 0; col < 5; col++)
        for (int row = 0; row < 5; row++)
            res[row] += mat[col][row] * vec[col];
}

int main(void)
{
    int mat[5][5], vec[5], res[5];
    unsigned check = 0;
    for (int r = 0; r < REPS; r++) {
        for (int i = 0; i < 5; i++) {
            vec[i] = i + r;
            for (int j = 0; j < 5; j++)
                mat[i][j] = (i * 5 + j) - r;
        }
        matmul(mat, vec, res);
        for (int i = 0; i < 5; i++)
            check = check * 33 + (unsigned)res[i];
    }
    zk_print("matmul: ");
    zk_print_u32(check);
    zk_print("\n");
    return 0;
}

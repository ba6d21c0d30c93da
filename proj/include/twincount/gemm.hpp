#pragma once

namespace twincount {

// Row-major C = alpha * op(A) * op(B) + beta * C, backed by OpenBLAS.
// OpenBLAS is pinned to one thread on first use; batch-level parallelism
// lives in the layer loops so results do not depend on BLAS scheduling.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc);

// Orthonormal factor of a random Gaussian matrix: fills q (rows x cols,
// row-major, rows >= cols) with orthonormal columns via LAPACK QR.
void random_orthonormal_columns(int rows, int cols, double* q,
                                unsigned long long seed);

}  // namespace twincount

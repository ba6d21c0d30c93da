#include "twincount/gemm.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <mutex>
#include <stdexcept>
#include <vector>

#include "twincount/rng.hpp"

extern "C" void openblas_set_num_threads(int);

namespace twincount {

namespace {

void ensure_single_threaded_blas() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
  ensure_single_threaded_blas();
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  ensure_single_threaded_blas();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

void random_orthonormal_columns(int rows, int cols, double* q,
                                unsigned long long seed) {
  if (rows < cols) throw std::invalid_argument("rows must be >= cols");
  ensure_single_threaded_blas();
  Rng rng(seed);
  for (int i = 0; i < rows * cols; ++i) q[i] = rng.normal();
  std::vector<double> tau(cols);
  int info = LAPACKE_dgeqrf(LAPACK_ROW_MAJOR, rows, cols, q, cols, tau.data());
  if (info != 0) throw std::runtime_error("dgeqrf failed");
  info = LAPACKE_dorgqr(LAPACK_ROW_MAJOR, rows, cols, cols, q, cols, tau.data());
  if (info != 0) throw std::runtime_error("dorgqr failed");
}

}  // namespace twincount

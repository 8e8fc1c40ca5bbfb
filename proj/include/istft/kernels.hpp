#pragma once

#include <functional>

namespace istft::kernels {

/// Worker-thread cap. Resolution order: explicit set_max_threads() call,
/// then the ISTFT_THREADS environment variable, then the OpenMP default.
int max_threads();
void set_max_threads(int n);

// Dense row-major matrix products. acc=true accumulates into c instead of
// overwriting. The parallel variants split work by output row, so every
// c[i][j] is produced by a single thread with a fixed summation order and
// the result is bit-identical to the serial reference at any thread count.

/// c[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
/// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
/// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);

// Serial reference implementations, kept for equivalence tests and the
// benchmark target.
void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);

/// Run fn(0..n-1) across the worker pool. Iterations must be independent;
/// scheduling is static so the iteration->thread map is reproducible.
/// Exceptions thrown by fn are captured and rethrown on the calling thread.
void parallel_for(int n, const std::function<void(int)>& fn);

} // namespace istft::kernels

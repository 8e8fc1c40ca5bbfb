#include "istft/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace istft::kernels {

namespace {

int g_max_threads = 0; // 0 = unresolved

int resolve_threads() {
    if (const char* env = std::getenv("ISTFT_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// OpenMP pays off only once the product is large enough to amortize the
// fork/join; below this the serial path wins on the small per-layer matrices.
constexpr long kParallelFlopThreshold = 1L << 18;

inline void mm_rows(const double* a, const double* b, double* c, int m, int k, int n, bool acc,
                    int row_lo, int row_hi) {
    for (int i = row_lo; i < row_hi; ++i) {
        double* ci = c + static_cast<long>(i) * n;
        if (!acc) std::fill(ci, ci + n, 0.0);
        const double* ai = a + static_cast<long>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = ai[kk];
            const double* bk = b + static_cast<long>(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
}

inline void mm_nt_rows(const double* a, const double* b, double* c, int m, int k, int n, bool acc,
                       int row_lo, int row_hi) {
    for (int i = row_lo; i < row_hi; ++i) {
        const double* ai = a + static_cast<long>(i) * k;
        double* ci = c + static_cast<long>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<long>(j) * k;
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
            ci[j] = acc ? ci[j] + s : s;
        }
    }
}

inline void mm_tn_rows(const double* a, const double* b, double* c, int m, int k, int n, bool acc,
                       int row_lo, int row_hi) {
    // a is k x m, result row i = sum_kk a[kk][i] * b[kk][:]
    for (int i = row_lo; i < row_hi; ++i) {
        double* ci = c + static_cast<long>(i) * n;
        if (!acc) std::fill(ci, ci + n, 0.0);
        for (int kk = 0; kk < k; ++kk) {
            const double aki = a[static_cast<long>(kk) * m + i];
            const double* bk = b + static_cast<long>(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] += aki * bk[j];
        }
    }
}

template <class RowFn>
void dispatch(int m, int k, int n, RowFn&& rows) {
    const long flops = static_cast<long>(m) * k * n;
    int nt = max_threads();
#ifdef _OPENMP
    if (nt > 1 && flops >= kParallelFlopThreshold && m > 1 && !omp_in_parallel()) {
#pragma omp parallel num_threads(std::min(nt, m))
        {
            int tid = omp_get_thread_num();
            int nth = omp_get_num_threads();
            int chunk = (m + nth - 1) / nth;
            int lo = std::min(m, tid * chunk);
            int hi = std::min(m, lo + chunk);
            rows(lo, hi);
        }
        return;
    }
#else
    (void)flops;
    (void)nt;
#endif
    rows(0, m);
}

} // namespace

int max_threads() {
    if (g_max_threads == 0) g_max_threads = resolve_threads();
    return g_max_threads;
}

void set_max_threads(int n) { g_max_threads = n >= 1 ? n : 1; }

void matmul_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    mm_rows(a, b, c, m, k, n, acc, 0, m);
}
void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    mm_nt_rows(a, b, c, m, k, n, acc, 0, m);
}
void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    mm_tn_rows(a, b, c, m, k, n, acc, 0, m);
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    dispatch(m, k, n, [&](int lo, int hi) { mm_rows(a, b, c, m, k, n, acc, lo, hi); });
}
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    dispatch(m, k, n, [&](int lo, int hi) { mm_nt_rows(a, b, c, m, k, n, acc, lo, hi); });
}
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
    dispatch(m, k, n, [&](int lo, int hi) { mm_tn_rows(a, b, c, m, k, n, acc, lo, hi); });
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    int nt = std::min(max_threads(), n);
    std::exception_ptr err;
    std::mutex err_mutex;
#ifdef _OPENMP
    if (nt > 1 && !omp_in_parallel()) {
#pragma omp parallel for schedule(static) num_threads(nt)
        for (int i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
            }
        }
        if (err) std::rethrow_exception(err);
        return;
    }
#endif
    for (int i = 0; i < n; ++i) fn(i);
}

} // namespace istft::kernels

// Benchmark comparing the serial reference kernels against the OpenMP paths:
// raw matmul at several sizes, then batched window forward/backward passes.
#include <chrono>
#include <cstdio>
#include <vector>

#include "istft/kernels.hpp"
#include "istft/model.hpp"
#include "istft/training.hpp"

using namespace istft;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <class Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e100;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_seconds();
        fn();
        best = std::min(best, now_seconds() - t0);
    }
    return best;
}

void bench_matmul() {
    std::printf("matmul (c = a*b, doubles)\n");
    std::printf("%8s %12s %12s %8s\n", "n", "serial[ms]", "parallel[ms]", "speedup");
    Rng rng(7);
    for (int n : {128, 256, 512, 768}) {
        std::vector<double> a(static_cast<size_t>(n) * n), b(a.size()), c(a.size());
        for (auto& v : a) v = rng.uniform(-1, 1);
        for (auto& v : b) v = rng.uniform(-1, 1);
        const double ts = time_best_of(5, [&] {
            kernels::matmul_serial(a.data(), b.data(), c.data(), n, n, n);
        });
        const double tp = time_best_of(5, [&] {
            kernels::matmul(a.data(), b.data(), c.data(), n, n, n);
        });
        std::printf("%8d %12.3f %12.3f %8.2f\n", n, ts * 1e3, tp * 1e3, ts / tp);
    }
}

std::vector<Window> toy_windows(int count, ModelConfig& cfg) {
    cfg.d_model = 32;
    cfg.n_heads = 4;
    cfg.dropout_rate = 0.0;
    cfg.n_o = 3;
    cfg.n_I = 0;
    cfg.p = 0;
    cfg.n_k = 1;
    cfg.n_tau = 15;
    Rng rng(11);
    std::vector<Window> windows(count);
    for (int i = 0; i < count; ++i) {
        Window& w = windows[i];
        w.group_id = i + 1;
        w.n_k = cfg.n_k;
        w.n_tau = cfg.n_tau;
        w.n_o = cfg.n_o;
        w.times.resize(w.n_t());
        w.y.resize(static_cast<size_t>(w.n_t()) * w.n_o);
        for (int t = 0; t < w.n_t(); ++t) w.times[t] = 0.01 * t;
        for (auto& v : w.y) v = rng.uniform(-1, 1);
    }
    return windows;
}

void bench_batch_eval() {
    ModelConfig cfg;
    auto windows = toy_windows(64, cfg);
    IstftModel model(cfg, 3);
    model.set_normalization(
        {{}, {}, {}, {}, std::vector<double>(3, 0.0), std::vector<double>(3, 1.0)});

    std::printf("\nbatched window evaluation (64 windows, d_model=32, M=%d)\n", cfg.seq_len());
    std::printf("%8s %12s\n", "threads", "loss[ms]");
    const int hw = kernels::max_threads();
    for (int threads : {1, hw}) {
        kernels::set_max_threads(threads);
        const double t = time_best_of(3, [&] {
            evaluate_loss(model, windows, LossKind::mae);
        });
        std::printf("%8d %12.3f\n", threads, t * 1e3);
        if (hw == 1) break;
    }
    kernels::set_max_threads(hw);
}

} // namespace

int main() {
    std::printf("worker threads: %d\n\n", kernels::max_threads());
    bench_matmul();
    bench_batch_eval();
    return 0;
}

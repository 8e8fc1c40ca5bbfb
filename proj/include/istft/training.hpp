#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "istft/model.hpp"

namespace istft {

enum class LossKind { mae, mse };

LossKind parse_loss_kind(const std::string& s);
std::string loss_kind_name(LossKind k);

/// Loss normalization counts: window count (subsets x training groups) and
/// forecast steps.
struct LossCounts {
    int n_omega = 1;
    int n_p_train = 1;
    int n_tau = 1;
};

// Batch losses over stacked forecast rows. pred/target are R x n_o where
// R = windows * n_tau; rows are grouped per window. NaN inputs are rejected.
TensorPtr loss_mae(Graph& g, const TensorPtr& pred, const TensorPtr& target, const LossCounts& c);
/// Per-time-step Euclidean norm of the error, same normalization as MAE.
TensorPtr loss_mse(Graph& g, const TensorPtr& pred, const TensorPtr& target, const LossCounts& c);
/// Pinball loss at quantile q, normalized additionally by n_o.
TensorPtr quantile_loss(Graph& g, const TensorPtr& pred, const TensorPtr& target, double q,
                        const LossCounts& c);

struct TrainConfig {
    LossKind loss = LossKind::mae;
    double lr = 0.001;
    int batch = 256;
    int epochs = 100;
    std::optional<int> patience; // early stopping; disabled when absent
    double max_grad_norm = 1.0;
    uint64_t seed = 0;
    void validate(int max_epochs_hint = 0) const;
};

struct LossReport {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::vector<double> per_output_mae; // train, per output id
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<LossReport> log;
    int best_epoch = 0;
    double best_val_loss = 0.0;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8) over a fixed
/// weight list.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<TensorPtr> weights, double lr);
    /// Consumes the gradients accumulated in grads (registry order).
    void step(const std::vector<std::vector<double>>& grads);

private:
    std::vector<TensorPtr> weights_;
    double lr_;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Scale grads so the global L2 norm is at most max_norm. Returns the
/// pre-clip norm.
double clip_gradients(std::vector<std::vector<double>>& grads, double max_norm);

/// Epoch loop: seeded window shuffle, minibatch forward/backward (windows of
/// a batch may be evaluated in parallel; gradients accumulate in window
/// order), global-norm clipping, Adam update, per-epoch validation with
/// best-weights retention and optional early stopping. Windows must already
/// be normalized. Emits one loss-log CSV line per epoch to log_stream when
/// given.
TrainResult train(IstftModel& model, const std::vector<Window>& train_windows,
                  const std::vector<Window>& val_windows, const TrainConfig& cfg,
                  std::ostream* log_stream = nullptr);

/// Mean loss of eval-mode predictions over windows (no gradients).
double evaluate_loss(const IstftModel& model, const std::vector<Window>& windows, LossKind kind);

} // namespace istft

#include "istft/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "istft/kernels.hpp"

namespace istft {

LossKind parse_loss_kind(const std::string& s) {
    if (s == "mae") return LossKind::mae;
    if (s == "mse") return LossKind::mse;
    throw ConfigError("unknown loss kind '" + s + "' (expected mae or mse)");
}

std::string loss_kind_name(LossKind k) { return k == LossKind::mae ? "mae" : "mse"; }

namespace {

void reject_nan(const TensorPtr& t, const char* what) {
    for (double v : t->data)
        if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite value in loss input");
}

double denom(const LossCounts& c) {
    return static_cast<double>(c.n_omega) * c.n_p_train * c.n_tau;
}

} // namespace

TensorPtr loss_mae(Graph& g, const TensorPtr& pred, const TensorPtr& target, const LossCounts& c) {
    reject_nan(pred, "loss_mae");
    reject_nan(target, "loss_mae");
    return g.scale(g.sum(g.abs(g.sub(pred, target))), 1.0 / denom(c));
}

TensorPtr loss_mse(Graph& g, const TensorPtr& pred, const TensorPtr& target, const LossCounts& c) {
    reject_nan(pred, "loss_mse");
    reject_nan(target, "loss_mse");
    return g.scale(g.sum(g.rows_l2norm(g.sub(pred, target))), 1.0 / denom(c));
}

TensorPtr quantile_loss(Graph& g, const TensorPtr& pred, const TensorPtr& target, double q,
                        const LossCounts& c) {
    if (!(q > 0.0 && q < 1.0))
        throw ConfigError("quantile_loss: q=" + std::to_string(q) + " outside (0, 1)");
    reject_nan(pred, "quantile_loss");
    reject_nan(target, "quantile_loss");
    return g.scale(g.sum(g.pinball(pred, target, q)), 1.0 / (denom(c) * pred->cols));
}

void TrainConfig::validate(int) const {
    if (!(lr >= 0.0)) throw ConfigError("train: learning rate must be >= 0");
    if (batch < 1) throw ConfigError("train: batch size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (patience && (*patience < 1 || *patience > epochs))
        throw ConfigError("train: patience must lie in [1, epochs]");
    if (!(max_grad_norm > 0.0)) throw ConfigError("train: max gradient norm must be positive");
}

AdamOptimizer::AdamOptimizer(std::vector<TensorPtr> weights, double lr)
    : weights_(std::move(weights)), lr_(lr) {
    m_.resize(weights_.size());
    v_.resize(weights_.size());
    for (size_t i = 0; i < weights_.size(); ++i) {
        m_[i].assign(weights_[i]->data.size(), 0.0);
        v_[i].assign(weights_[i]->data.size(), 0.0);
    }
}

void AdamOptimizer::step(const std::vector<std::vector<double>>& grads) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, t_);
    const double bc2 = 1.0 - std::pow(beta2, t_);
    for (size_t i = 0; i < weights_.size(); ++i) {
        auto& w = weights_[i]->data;
        const auto& grad = grads[i];
        for (size_t j = 0; j < w.size(); ++j) {
            m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * grad[j];
            v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * grad[j] * grad[j];
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double clip_gradients(std::vector<std::vector<double>>& grads, double max_norm) {
    double ss = 0.0;
    for (const auto& g : grads)
        for (double v : g) ss += v * v;
    const double norm = std::sqrt(ss);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& g : grads)
            for (double& v : g) v *= s;
    }
    return norm;
}

namespace {

struct WindowEval {
    double loss_sum = 0.0;              // window's summed loss terms (pre-normalization)
    std::vector<double> abs_per_output; // summed |error| per output id
    LeafGradMap grads;                  // present only for training passes
};

TensorPtr targets_tensor(const Window& w) {
    auto t = window_targets(w);
    return Tensor::from(std::move(t), w.n_tau * w.n_o, 1);
}

// Forward (and optionally backward) one window. The per-window loss is the
// raw sum of loss terms; normalization is applied by the caller.
WindowEval eval_window(const IstftModel& model, const Window& w, LossKind kind, bool train,
                       Rng dropout_rng, double grad_scale) {
    WindowEval ev;
    Graph g;
    auto fwd = model.forward(g, window_inputs(w), train, train ? &dropout_rng : nullptr);
    auto pred = g.reshape(fwd.predictions, w.n_tau, w.n_o);
    auto target = g.reshape(targets_tensor(w), w.n_tau, w.n_o);
    LossCounts unit{1, 1, 1};
    auto loss = kind == LossKind::mae ? loss_mae(g, pred, target, unit)
                                      : loss_mse(g, pred, target, unit);
    ev.loss_sum = loss->value();
    ev.abs_per_output.assign(w.n_o, 0.0);
    for (int s = 0; s < w.n_tau * w.n_o; ++s)
        ev.abs_per_output[s % w.n_o] +=
            std::fabs(fwd.predictions->data[s] - target->data[s]);
    if (!std::isfinite(ev.loss_sum))
        throw NumericError("training diverged: non-finite loss for group " +
                           std::to_string(w.group_id) + ", window " +
                           std::to_string(w.window_index));
    if (train) g.backward(g.scale(loss, grad_scale), &ev.grads);
    return ev;
}

} // namespace

double evaluate_loss(const IstftModel& model, const std::vector<Window>& windows, LossKind kind) {
    if (windows.empty()) return 0.0;
    std::vector<double> sums(windows.size());
    kernels::parallel_for(static_cast<int>(windows.size()), [&](int i) {
        sums[i] = eval_window(model, windows[i], kind, false, Rng(0), 0.0).loss_sum;
    });
    double total = 0.0;
    for (double s : sums) total += s;
    return total / (static_cast<double>(windows.size()) * windows[0].n_tau);
}

TrainResult train(IstftModel& model, const std::vector<Window>& train_windows,
                  const std::vector<Window>& val_windows, const TrainConfig& cfg,
                  std::ostream* log_stream) {
    cfg.validate();
    if (train_windows.empty()) throw ConfigError("train: no training windows");
    const int n_tau = train_windows[0].n_tau;

    std::vector<TensorPtr> weight_list;
    for (const auto& [name, w] : model.weights()) {
        (void)name;
        weight_list.push_back(w);
    }
    AdamOptimizer adam(weight_list, cfg.lr);

    Rng base(cfg.seed);
    std::vector<int> order(train_windows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    TrainResult result;
    result.best_val_loss = std::numeric_limits<double>::infinity();
    auto best_snapshot = model.snapshot_weights();
    bool have_val = !val_windows.empty();

    if (log_stream) *log_stream << "epoch,train_loss,val_loss,seconds\n";

    const auto t0 = std::chrono::steady_clock::now();
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng = base.fork(epoch);
        istft::shuffle(order, shuffle_rng);

        double epoch_loss_sum = 0.0;
        std::vector<double> epoch_abs(train_windows[0].n_o, 0.0);
        for (size_t batch_start = 0; batch_start < order.size(); batch_start += cfg.batch) {
            const size_t batch_end = std::min(order.size(), batch_start + cfg.batch);
            const int bsz = static_cast<int>(batch_end - batch_start);
            // each window's summed loss terms are scaled by 1 / (batch * n_tau)
            // so the batch gradient matches the reported mean loss
            const double grad_scale = 1.0 / (static_cast<double>(bsz) * n_tau);

            std::vector<WindowEval> evals(bsz);
            kernels::parallel_for(bsz, [&](int bi) {
                const int wi = order[batch_start + bi];
                Rng drop = base.fork(0x10000000ull + static_cast<uint64_t>(epoch) * 1048576 + wi);
                evals[bi] =
                    eval_window(model, train_windows[wi], cfg.loss, true, drop, grad_scale);
            });

            // deterministic accumulation in window order, then clip + step
            std::vector<std::vector<double>> grads(weight_list.size());
            for (size_t i = 0; i < weight_list.size(); ++i)
                grads[i].assign(weight_list[i]->data.size(), 0.0);
            for (auto& ev : evals) {
                epoch_loss_sum += ev.loss_sum;
                for (size_t k = 0; k < epoch_abs.size(); ++k) epoch_abs[k] += ev.abs_per_output[k];
                for (size_t i = 0; i < weight_list.size(); ++i) {
                    auto it = ev.grads.find(weight_list[i].get());
                    if (it == ev.grads.end()) continue;
                    for (size_t j = 0; j < grads[i].size(); ++j) grads[i][j] += it->second[j];
                }
            }
            clip_gradients(grads, cfg.max_grad_norm);
            adam.step(grads);
        }

        LossReport report;
        report.epoch = epoch;
        report.train_loss =
            epoch_loss_sum / (static_cast<double>(train_windows.size()) * n_tau);
        report.val_loss = have_val ? evaluate_loss(model, val_windows, cfg.loss)
                                   : report.train_loss;
        report.per_output_mae = epoch_abs;
        for (double& v : report.per_output_mae)
            v /= static_cast<double>(train_windows.size()) * n_tau;
        report.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(report);
        if (log_stream) {
            char line[160];
            std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.3f\n", epoch, report.train_loss,
                          report.val_loss, report.seconds);
            *log_stream << line;
        }

        if (report.val_loss < result.best_val_loss) {
            result.best_val_loss = report.val_loss;
            result.best_epoch = epoch;
            best_snapshot = model.snapshot_weights();
        } else if (cfg.patience && epoch - result.best_epoch >= *cfg.patience) {
            break;
        }
    }

    model.restore_weights(best_snapshot);
    return result;
}

} // namespace istft

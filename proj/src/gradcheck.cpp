#include "istft/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "istft/attention.hpp"
#include "istft/model.hpp"

namespace istft::gradcheck {

double fd_derivative(Tensor& t, int idx, const std::function<double()>& eval, double h) {
    const double saved = t.data[idx];
    t.data[idx] = saved + h;
    const double up = eval();
    t.data[idx] = saved - h;
    const double down = eval();
    t.data[idx] = saved;
    return (up - down) / (2.0 * h);
}

double rel_err(double analytic, double numeric) {
    const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

namespace {

TensorPtr random_tensor(int r, int c, Rng& rng, double lo = -1.5, double hi = 1.5) {
    auto t = Tensor::zeros(r, c, true);
    for (auto& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

// Random tensor bounded away from 0; keeps abs/pinball/rows_l2norm off their
// nondifferentiable points during differencing.
TensorPtr random_signed_tensor(int r, int c, Rng& rng) {
    auto t = Tensor::zeros(r, c, true);
    for (auto& v : t->data) v = (rng.u01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.3, 1.5);
    return t;
}

struct OpProbe {
    std::string name;
    std::vector<TensorPtr> inputs;
    // builds the op output from inputs on the given graph
    std::function<TensorPtr(Graph&, const std::vector<TensorPtr>&)> run;
};

double check_probe(const OpProbe& probe, Rng& rng) {
    // Scalarize through a fixed random weighting so every output entry
    // contributes a distinct gradient signal.
    TensorPtr probe_w;
    auto loss_value = [&]() {
        Graph g;
        auto out = probe.run(g, probe.inputs);
        if (!probe_w) {
            probe_w = Tensor::zeros(out->rows, out->cols);
            for (auto& v : probe_w->data) v = rng.uniform(-1.0, 1.0);
        }
        return g.sum(g.mul(out, probe_w))->value();
    };
    // analytic pass
    Graph g;
    auto out = probe.run(g, probe.inputs);
    if (!probe_w) {
        probe_w = Tensor::zeros(out->rows, out->cols);
        for (auto& v : probe_w->data) v = rng.uniform(-1.0, 1.0);
    }
    auto loss = g.sum(g.mul(out, probe_w));
    g.backward(loss);

    double worst = 0.0;
    for (const auto& in : probe.inputs) {
        if (!in->requires_grad) continue;
        in->ensure_grad();
        for (int idx = 0; idx < in->numel(); ++idx) {
            const double numeric = fd_derivative(*in, idx, loss_value);
            worst = std::max(worst, rel_err(in->grad[idx], numeric));
        }
    }
    return worst;
}

} // namespace

std::vector<OpCheck> check_all_ops(uint64_t seed) {
    Rng rng(seed);
    std::vector<OpProbe> probes;

    probes.push_back({"matmul",
                      {random_tensor(3, 4, rng), random_tensor(4, 2, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.matmul(in[0], in[1]); }});

    {
        auto mask = attention::build_block_mask(3, 2);
        probes.push_back({"masked_softmax",
                          {random_tensor(6, 6, rng)},
                          [mask](Graph& g, const std::vector<TensorPtr>& in) {
                              return g.masked_softmax(in[0], mask.allowed);
                          }});
    }
    probes.push_back({"softmax_rows",
                      {random_tensor(4, 5, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.softmax_rows(in[0]); }});
    probes.push_back({"add",
                      {random_tensor(3, 3, rng), random_tensor(3, 3, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.add(in[0], in[1]); }});
    probes.push_back({"sub",
                      {random_tensor(3, 3, rng), random_tensor(3, 3, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.sub(in[0], in[1]); }});
    probes.push_back({"mul",
                      {random_tensor(3, 3, rng), random_tensor(3, 3, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.mul(in[0], in[1]); }});
    probes.push_back({"scale",
                      {random_tensor(3, 3, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.scale(in[0], -2.5); }});
    probes.push_back({"sigmoid",
                      {random_tensor(3, 4, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.sigmoid(in[0]); }});
    probes.push_back({"tanh",
                      {random_tensor(3, 4, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.tanh(in[0]); }});
    probes.push_back({"elu",
                      {random_signed_tensor(3, 4, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.elu(in[0]); }});
    probes.push_back({"abs",
                      {random_signed_tensor(3, 4, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.abs(in[0]); }});
    probes.push_back({"add_rowvec",
                      {random_tensor(4, 3, rng), random_tensor(1, 3, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.add_rowvec(in[0], in[1]); }});
    probes.push_back({"mul_colvec",
                      {random_tensor(4, 3, rng), random_tensor(4, 1, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.mul_colvec(in[0], in[1]); }});
    probes.push_back({"transpose",
                      {random_tensor(3, 5, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.transpose(in[0]); }});
    probes.push_back({"concat_rows",
                      {random_tensor(2, 3, rng), random_tensor(4, 3, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) {
                          return g.concat_rows({in[0], in[1]});
                      }});
    probes.push_back({"concat_cols",
                      {random_tensor(3, 2, rng), random_tensor(3, 4, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) {
                          return g.concat_cols({in[0], in[1]});
                      }});
    probes.push_back({"slice_rows",
                      {random_tensor(5, 3, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.slice_rows(in[0], 1, 4); }});
    probes.push_back({"slice_cols",
                      {random_tensor(3, 5, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.slice_cols(in[0], 2, 5); }});
    probes.push_back({"layer_norm",
                      {random_tensor(4, 6, rng), random_tensor(1, 6, rng), random_tensor(1, 6, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) {
                          return g.layer_norm(in[0], in[1], in[2]);
                      }});
    probes.push_back({"dropout",
                      {random_tensor(4, 6, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) {
                          Rng mask_rng(12345); // same mask on every evaluation
                          return g.dropout(in[0], 0.7, mask_rng, true);
                      }});
    probes.push_back({"sum",
                      {random_tensor(3, 4, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.sum(in[0]); }});
    probes.push_back({"rows_l2norm",
                      {random_signed_tensor(4, 3, rng)},
                      [](Graph& g, const std::vector<TensorPtr>& in) { return g.rows_l2norm(in[0]); }});
    {
        auto target = random_signed_tensor(3, 4, rng);
        target->requires_grad = false;
        probes.push_back({"pinball",
                          {random_signed_tensor(3, 4, rng), target},
                          [](Graph& g, const std::vector<TensorPtr>& in) {
                              return g.pinball(in[0], in[1], 0.3);
                          }});
    }

    std::vector<OpCheck> results;
    results.reserve(probes.size());
    for (auto& p : probes) results.push_back({p.name, check_probe(p, rng)});
    return results;
}

double check_model(uint64_t seed, int sampled_weights) {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.dropout_rate = 0.0;
    cfg.n_o = 2;
    cfg.n_I = 1;
    cfg.p = 1;
    cfg.n_k = 1;
    cfg.n_tau = 2;
    IstftModel model(cfg, seed);

    Rng rng(seed ^ 0xabcdef);
    std::vector<ModelInputs> batch(2);
    for (auto& w : batch) {
        w.past_y.resize(static_cast<size_t>(cfg.n_k) * cfg.n_o);
        w.u.resize(static_cast<size_t>(cfg.n_k + cfg.n_tau) * cfg.n_I);
        w.mu.resize(cfg.p);
        for (auto& v : w.past_y) v = rng.uniform(-1, 1);
        for (auto& v : w.u) v = rng.uniform(-1, 1);
        for (auto& v : w.mu) v = rng.uniform(-1, 1);
    }
    std::vector<std::vector<double>> targets(2);
    for (auto& t : targets) {
        t.resize(static_cast<size_t>(cfg.n_tau) * cfg.n_o);
        for (auto& v : t) v = rng.uniform(-1, 1);
    }

    // smooth scalar: sum of squared errors over the 2-window batch
    auto loss_value = [&]() {
        double total = 0.0;
        for (size_t i = 0; i < batch.size(); ++i) {
            Graph g;
            auto fwd = model.forward(g, batch[i], /*train=*/false, nullptr);
            auto diff = g.sub(fwd.predictions, Tensor::from(targets[i], cfg.n_tau * cfg.n_o, 1));
            total += g.sum(g.mul(diff, diff))->value();
        }
        return total;
    };

    // analytic gradients, accumulated across the batch
    for (auto& [name, w] : model.weights()) {
        (void)name;
        w->ensure_grad();
        w->zero_grad();
    }
    for (size_t i = 0; i < batch.size(); ++i) {
        Graph g;
        auto fwd = model.forward(g, batch[i], false, nullptr);
        auto diff = g.sub(fwd.predictions, Tensor::from(targets[i], cfg.n_tau * cfg.n_o, 1));
        g.backward(g.sum(g.mul(diff, diff)));
    }

    // flat index over all weight entries
    std::vector<std::pair<Tensor*, int>> entries;
    for (auto& [name, w] : model.weights()) {
        (void)name;
        for (int i = 0; i < w->numel(); ++i) entries.push_back({w.get(), i});
    }
    Rng pick(seed ^ 0x5117);
    double worst = 0.0;
    for (int s = 0; s < sampled_weights; ++s) {
        auto [t, idx] = entries[pick.uniform_int(entries.size())];
        const double numeric = fd_derivative(*t, idx, loss_value);
        worst = std::max(worst, rel_err(t->grad[idx], numeric));
    }
    return worst;
}

} // namespace istft::gradcheck

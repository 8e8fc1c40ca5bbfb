#include "istft/model.hpp"

#include <fstream>

#include "json.hpp"

namespace istft {

void ModelConfig::validate() const {
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0)
        throw ConfigError("model: d_model " + std::to_string(d_model) +
                          " must be positive and divisible by heads " + std::to_string(n_heads));
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("model: dropout rate must lie in [0, 1)");
    if (n_o < 1) throw ConfigError("model: n_o must be >= 1");
    if (n_I < 0 || p < 0) throw ConfigError("model: n_I and p must be >= 0");
    if (n_k < 1 || n_tau < 1) throw ConfigError("model: n_k and n_tau must be >= 1");
}

ModelInputs window_inputs(const Window& w) {
    ModelInputs in;
    in.past_y.assign(w.y.begin(), w.y.begin() + static_cast<size_t>(w.n_k) * w.n_o);
    in.u = w.u;
    in.mu = w.mu;
    return in;
}

std::vector<double> window_targets(const Window& w) {
    return {w.y.begin() + static_cast<size_t>(w.n_k) * w.n_o, w.y.end()};
}

IstftModel::IstftModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    mask_ = attention::build_block_mask(cfg_.n_t(), cfg_.n_o);
    build(init_seed);
}

void IstftModel::build(uint64_t init_seed) {
    Rng rng(init_seed);
    const int d = cfg_.d_model;

    for (int i = 0; i < cfg_.n_I; ++i)
        emb_u_.emplace_back(registry_, "embed.u" + std::to_string(i + 1), d, rng);
    emb_y_ = std::make_unique<ScalarEmbedding>(registry_, "embed.observed", d, rng);
    for (int j = 0; j < cfg_.p; ++j)
        emb_mu_.emplace_back(registry_, "embed.mu" + std::to_string(j + 1), d, rng);
    if (cfg_.n_I == 0)
        future_placeholder_ = registry_.create("embed.future_token", 1, d, d, rng);

    const bool has_static = cfg_.p > 0;
    if (has_static) {
        static_vsn_ = std::make_unique<VarSelWeights>(registry_, "static.vsn", cfg_.p, d, false, rng);
        static_encoders_ = std::make_unique<StaticEncoders>(registry_, "static", d, rng);
    }
    past_vsn_ = std::make_unique<VarSelWeights>(registry_, "past.vsn", past_var_count(), d,
                                                has_static, rng);
    future_vsn_ = std::make_unique<VarSelWeights>(registry_, "future.vsn", future_var_count(), d,
                                                  has_static, rng);
    lstm_ = std::make_unique<LstmWeights>(registry_, "lstm", d, rng);
    post_lstm_gate_ = std::make_unique<Glu>(registry_, "post_lstm", d, d, rng);
    post_lstm_norm_ = std::make_unique<LayerNormParams>(registry_, "post_lstm", d);
    enrichment_ = std::make_unique<Grn>(registry_, "enrich", d, d, d, has_static, rng);
    attn_ = std::make_unique<attention::AttentionWeights>(registry_, "attn", d, cfg_.n_heads, rng);
    post_attn_gate_ = std::make_unique<Glu>(registry_, "post_attn", d, d, rng);
    post_attn_norm_ = std::make_unique<LayerNormParams>(registry_, "post_attn", d);
    poswise_ = std::make_unique<Grn>(registry_, "poswise", d, d, d, false, rng);
    final_gate_ = std::make_unique<Glu>(registry_, "final", d, d, rng);
    final_norm_ = std::make_unique<LayerNormParams>(registry_, "final", d);
    head_w_ = registry_.create("head.w", d, 1, d, rng);
    head_b_ = registry_.create_zeros("head.b", 1, 1);
}

namespace {

// Column of one past variable over the n_k * n_o past positions. Known
// inputs repeat across the n_o positions of a time block; the observed
// output carries each position's own value.
TensorPtr past_column(const ModelInputs& in, const ModelConfig& cfg, int var, bool observed) {
    const int m = cfg.n_k * cfg.n_o;
    std::vector<double> col(m);
    for (int s = 0; s < m; ++s) {
        const int ti = s / cfg.n_o;
        col[s] = observed ? in.past_y[s] : in.u[static_cast<size_t>(ti) * cfg.n_I + var];
    }
    return Tensor::from(std::move(col), m, 1);
}

TensorPtr future_column(const ModelInputs& in, const ModelConfig& cfg, int var) {
    const int m = cfg.n_tau * cfg.n_o;
    std::vector<double> col(m);
    for (int s = 0; s < m; ++s) {
        const int ti = cfg.n_k + s / cfg.n_o;
        col[s] = in.u[static_cast<size_t>(ti) * cfg.n_I + var];
    }
    return Tensor::from(std::move(col), m, 1);
}

} // namespace

ForwardResult IstftModel::forward(Graph& g, const ModelInputs& in, bool train,
                                  Rng* dropout_rng) const {
    const int d = cfg_.d_model;
    const int m_past = cfg_.n_k * cfg_.n_o;
    const int m_future = cfg_.n_tau * cfg_.n_o;
    if (in.past_y.size() != static_cast<size_t>(m_past))
        throw std::invalid_argument("forward: past_y has " + std::to_string(in.past_y.size()) +
                                    " values, window needs " + std::to_string(m_past));
    if (in.u.size() != static_cast<size_t>(cfg_.n_t()) * cfg_.n_I)
        throw std::invalid_argument("forward: u has " + std::to_string(in.u.size()) +
                                    " values, window needs " +
                                    std::to_string(cfg_.n_t() * cfg_.n_I));
    if (in.mu.size() != static_cast<size_t>(cfg_.p))
        throw std::invalid_argument("forward: mu has " + std::to_string(in.mu.size()) +
                                    " values, model has p=" + std::to_string(cfg_.p));

    Pass pass{g, train, 1.0 - cfg_.dropout_rate, dropout_rng};

    // static covariate branch
    TensorPtr c_selection, c_enrichment;
    LstmState init;
    TensorPtr static_weights;
    if (cfg_.p > 0) {
        std::vector<TensorPtr> mu_emb;
        for (int j = 0; j < cfg_.p; ++j)
            mu_emb.push_back(emb_mu_[j].forward(g, Tensor::scalar(in.mu[j])));
        auto sel = static_vsn_->forward(pass, mu_emb, nullptr);
        static_weights = sel.weights;
        auto ctx = static_encoders_->forward(pass, sel.combined);
        c_selection = ctx.c_selection;
        c_enrichment = ctx.c_enrichment;
        init = {ctx.c_hidden, ctx.c_cell};
    } else {
        init = {Tensor::zeros(1, d), Tensor::zeros(1, d)};
    }

    // per-variable embeddings and selection, past then future
    std::vector<TensorPtr> past_emb;
    for (int i = 0; i < cfg_.n_I; ++i)
        past_emb.push_back(emb_u_[i].forward(g, past_column(in, cfg_, i, false)));
    past_emb.push_back(emb_y_->forward(g, past_column(in, cfg_, 0, true)));
    auto past_sel = past_vsn_->forward(pass, past_emb, c_selection);

    std::vector<TensorPtr> future_emb;
    if (cfg_.n_I > 0) {
        for (int i = 0; i < cfg_.n_I; ++i)
            future_emb.push_back(emb_u_[i].forward(g, future_column(in, cfg_, i)));
    } else {
        // learned constant token at every future position
        std::vector<TensorPtr> rows(m_future, future_placeholder_);
        future_emb.push_back(g.concat_rows(rows));
    }
    auto future_sel = future_vsn_->forward(pass, future_emb, c_selection);

    // sequence-to-sequence layer plus its gate
    auto temporal = lstm_encode_decode(g, *lstm_, past_sel.combined, future_sel.combined, init);
    auto selected = g.concat_rows({past_sel.combined, future_sel.combined});
    auto gated_temporal = post_lstm_norm_->apply(
        g, g.add(selected, post_lstm_gate_->forward(g, apply_dropout(pass, temporal))));

    // static enrichment, block-masked attention, position-wise feed-forward
    auto enriched = enrichment_->forward(pass, gated_temporal, c_enrichment);
    auto mha = attention::interpretable_mha(g, enriched, *attn_, mask_);
    auto gated_attn = post_attn_norm_->apply(
        g, g.add(enriched, post_attn_gate_->forward(g, apply_dropout(pass, mha.output))));
    auto ff = poswise_->forward(pass, gated_attn, nullptr);
    auto fused = final_norm_->apply(g, g.add(enriched, final_gate_->forward(g, ff)));

    // dense head, read at the future positions
    auto yhat_all = g.add_rowvec(g.matmul(fused, head_w_), head_b_);
    auto predictions = g.slice_rows(yhat_all, m_past, m_past + m_future);

    return {predictions, mha.attention, past_sel.weights, future_sel.weights, static_weights};
}

std::vector<std::vector<double>> IstftModel::snapshot_weights() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(weights().size());
    for (const auto& [name, w] : weights()) {
        (void)name;
        snap.push_back(w->data);
    }
    return snap;
}

void IstftModel::restore_weights(const std::vector<std::vector<double>>& snap) {
    const auto& ws = weights();
    if (snap.size() != ws.size())
        throw std::invalid_argument("restore_weights: snapshot size mismatch");
    for (size_t i = 0; i < ws.size(); ++i) ws[i].second->data = snap[i];
}

// ------------------------------------------------------------ persistence

namespace {
constexpr int kModelFormatVersion = 1;
}

void IstftModel::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "istft-model";
    j["version"] = kModelFormatVersion;
    j["config"] = {{"d_model", cfg_.d_model}, {"heads", cfg_.n_heads},
                   {"dropout", cfg_.dropout_rate}, {"n_o", cfg_.n_o},   {"n_I", cfg_.n_I},
                   {"p", cfg_.p},               {"n_k", cfg_.n_k},     {"n_tau", cfg_.n_tau}};
    j["normalization"] = {{"u_mean", norm_.u_mean},   {"u_std", norm_.u_std},
                          {"mu_mean", norm_.mu_mean}, {"mu_std", norm_.mu_std},
                          {"y_mean", norm_.y_mean},   {"y_std", norm_.y_std}};
    nlohmann::json weights_json = nlohmann::json::object();
    for (const auto& [name, w] : weights())
        weights_json[name] = {{"shape", w->shape()}, {"data", w->data}};
    j["weights"] = std::move(weights_json);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << j.dump();
    if (!f) throw DataError("write to '" + path + "' failed");
}

IstftModel IstftModel::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file '" + path + "' is not readable: " + e.what());
    }
    try {
        if (j.value("format", "") != "istft-model")
            throw DataError("model file '" + path + "': unrecognized format tag");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw DataError("model file '" + path + "': version " +
                            std::to_string(j.at("version").get<int>()) + ", expected " +
                            std::to_string(kModelFormatVersion));
        const auto& jc = j.at("config");
        ModelConfig cfg;
        cfg.d_model = jc.at("d_model").get<int>();
        cfg.n_heads = jc.at("heads").get<int>();
        cfg.dropout_rate = jc.at("dropout").get<double>();
        cfg.n_o = jc.at("n_o").get<int>();
        cfg.n_I = jc.at("n_I").get<int>();
        cfg.p = jc.at("p").get<int>();
        cfg.n_k = jc.at("n_k").get<int>();
        cfg.n_tau = jc.at("n_tau").get<int>();

        IstftModel model(cfg, /*init_seed=*/0);
        const auto& jn = j.at("normalization");
        NormStats stats;
        stats.u_mean = jn.at("u_mean").get<std::vector<double>>();
        stats.u_std = jn.at("u_std").get<std::vector<double>>();
        stats.mu_mean = jn.at("mu_mean").get<std::vector<double>>();
        stats.mu_std = jn.at("mu_std").get<std::vector<double>>();
        stats.y_mean = jn.at("y_mean").get<std::vector<double>>();
        stats.y_std = jn.at("y_std").get<std::vector<double>>();
        model.set_normalization(std::move(stats));

        const auto& jw = j.at("weights");
        for (const auto& [name, w] : model.weights()) {
            auto it = jw.find(name);
            if (it == jw.end())
                throw DataError("model file '" + path + "': missing weight '" + name + "'");
            const auto shape = it->at("shape").get<std::vector<int>>();
            if (shape != w->shape())
                throw DataError("model file '" + path + "': weight '" + name +
                                "' has shape mismatch");
            auto values = it->at("data").get<std::vector<double>>();
            if (values.size() != w->data.size())
                throw DataError("model file '" + path + "': weight '" + name +
                                "' has wrong element count");
            w->data = std::move(values);
        }
        if (jw.size() != model.weights().size())
            throw DataError("model file '" + path + "': weight manifest has " +
                            std::to_string(jw.size()) + " entries, model expects " +
                            std::to_string(model.weights().size()));
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file '" + path + "' is malformed: " + e.what());
    }
}

PredictionBatch predict(const IstftModel& model, const Window& w) {
    const auto& cfg = model.config();
    if (w.n_k != cfg.n_k || w.n_tau != cfg.n_tau || w.n_o != cfg.n_o || w.n_I != cfg.n_I ||
        w.p != cfg.p)
        throw DataError("predict: window layout (n_k=" + std::to_string(w.n_k) + ", n_tau=" +
                        std::to_string(w.n_tau) + ", n_o=" + std::to_string(w.n_o) +
                        ") does not match the model configuration");
    const Window normed = normalize_window(w, model.normalization());
    Graph g;
    auto fwd = model.forward(g, window_inputs(normed), /*train=*/false, nullptr);
    PredictionBatch batch;
    batch.raw = fwd;
    batch.yhat.resize(static_cast<size_t>(cfg.n_tau) * cfg.n_o);
    const auto& stats = model.normalization();
    for (int s = 0; s < cfg.n_tau * cfg.n_o; ++s) {
        const int k = s % cfg.n_o;
        batch.yhat[s] = fwd.predictions->data[s] * stats.y_std[k] + stats.y_mean[k];
    }
    return batch;
}

} // namespace istft

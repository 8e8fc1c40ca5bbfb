#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "istft/attention.hpp"
#include "istft/data.hpp"
#include "istft/layers.hpp"

namespace istft {

struct ModelConfig {
    int d_model = 32;
    int n_heads = 4;
    double dropout_rate = 0.1;
    int n_o = 1; // outputs
    int n_I = 0; // known inputs
    int p = 0;   // static parameters
    int n_k = 1; // past steps
    int n_tau = 1; // forecast steps

    int n_t() const { return n_k + n_tau; }
    int seq_len() const { return n_t() * n_o; }
    void validate() const;
};

/// One window of model inputs, already in normalized units.
struct ModelInputs {
    std::vector<double> past_y; // n_k x n_o row-major, observed outputs
    std::vector<double> u;      // n_t x n_I row-major, known inputs
    std::vector<double> mu;     // p
};

ModelInputs window_inputs(const Window& w);
std::vector<double> window_targets(const Window& w); // n_tau x n_o

struct ForwardResult {
    TensorPtr predictions;      // (n_tau * n_o) x 1, normalized units
    TensorPtr attention;        // M x M averaged attention
    TensorPtr past_selection;   // (n_k * n_o) x V_past
    TensorPtr future_selection; // (n_tau * n_o) x V_future
    TensorPtr static_selection; // 1 x p; null when p == 0
};

/// Prediction plus interpretability byproducts for one window, with the
/// forecast mapped back to original units.
struct PredictionBatch {
    std::vector<double> yhat; // n_tau x n_o row-major, original units
    ForwardResult raw;
};

/// Multi-output temporal fusion forecaster over the spatial-temporal
/// sequence of n_t time blocks with n_o positions each. A single pass emits
/// all n_tau x n_o forecasts.
class IstftModel {
public:
    IstftModel(const ModelConfig& cfg, uint64_t init_seed);

    const ModelConfig& config() const { return cfg_; }
    const attention::BlockMask& mask() const { return mask_; }
    const std::vector<std::pair<std::string, TensorPtr>>& weights() const { return registry_.items(); }

    ForwardResult forward(Graph& g, const ModelInputs& in, bool train, Rng* dropout_rng) const;

    void set_normalization(NormStats stats) { norm_ = std::move(stats); }
    const NormStats& normalization() const { return norm_; }

    void save(const std::string& path) const;
    static IstftModel load(const std::string& path);

    /// Copy weight values out / back in, in registry order.
    std::vector<std::vector<double>> snapshot_weights() const;
    void restore_weights(const std::vector<std::vector<double>>& snap);

    /// How many variables feed the past/future selection networks.
    int past_var_count() const { return cfg_.n_I + 1; }
    int future_var_count() const { return cfg_.n_I > 0 ? cfg_.n_I : 1; }

private:
    ModelConfig cfg_;
    WeightRegistry registry_;
    attention::BlockMask mask_;

    // embeddings
    std::vector<ScalarEmbedding> emb_u_;
    std::unique_ptr<ScalarEmbedding> emb_y_;
    std::vector<ScalarEmbedding> emb_mu_;
    TensorPtr future_placeholder_; // 1 x d_model learned token; null when n_I > 0

    // static covariate branch (present iff p > 0)
    std::unique_ptr<VarSelWeights> static_vsn_;
    std::unique_ptr<StaticEncoders> static_encoders_;

    // temporal path
    std::unique_ptr<VarSelWeights> past_vsn_, future_vsn_;
    std::unique_ptr<LstmWeights> lstm_;
    std::unique_ptr<Glu> post_lstm_gate_;
    std::unique_ptr<LayerNormParams> post_lstm_norm_;
    std::unique_ptr<Grn> enrichment_;
    std::unique_ptr<attention::AttentionWeights> attn_;
    std::unique_ptr<Glu> post_attn_gate_;
    std::unique_ptr<LayerNormParams> post_attn_norm_;
    std::unique_ptr<Grn> poswise_;
    std::unique_ptr<Glu> final_gate_;
    std::unique_ptr<LayerNormParams> final_norm_;
    TensorPtr head_w_, head_b_;

    NormStats norm_;

    void build(uint64_t init_seed);
};

/// Normalize a raw window with the model's stored statistics, run an
/// eval-mode forward pass, and denormalize the forecast.
PredictionBatch predict(const IstftModel& model, const Window& w);

} // namespace istft

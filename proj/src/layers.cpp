#include "istft/layers.hpp"

namespace istft {

TensorPtr WeightRegistry::create(const std::string& name, int rows, int cols, int fan_in, Rng& rng) {
    auto t = Tensor::uniform_init(rows, cols, fan_in, rng);
    items_.emplace_back(name, t);
    return t;
}

TensorPtr WeightRegistry::create_zeros(const std::string& name, int rows, int cols) {
    auto t = Tensor::zeros(rows, cols, true);
    items_.emplace_back(name, t);
    return t;
}

TensorPtr WeightRegistry::create_const(const std::string& name, int rows, int cols, double value) {
    auto t = Tensor::full(rows, cols, value, true);
    items_.emplace_back(name, t);
    return t;
}

TensorPtr WeightRegistry::find(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return t;
    return nullptr;
}

TensorPtr apply_dropout(Pass& p, const TensorPtr& x) {
    if (!p.train || p.keep_prob >= 1.0) return x;
    if (!p.rng) throw std::invalid_argument("dropout requested in train mode without an RNG");
    return p.g.dropout(x, p.keep_prob, *p.rng, true);
}

LayerNormParams::LayerNormParams(WeightRegistry& reg, const std::string& prefix, int dim)
    : gain(reg.create_const(prefix + ".ln_gain", 1, dim, 1.0)),
      bias(reg.create_zeros(prefix + ".ln_bias", 1, dim)) {}

TensorPtr LayerNormParams::apply(Graph& g, const TensorPtr& x) const {
    return g.layer_norm(x, gain, bias);
}

Glu::Glu(WeightRegistry& reg, const std::string& prefix, int in, int out, Rng& rng)
    : w_gate(reg.create(prefix + ".glu_wg", in, out, in, rng)),
      b_gate(reg.create_zeros(prefix + ".glu_bg", 1, out)),
      w_value(reg.create(prefix + ".glu_wv", in, out, in, rng)),
      b_value(reg.create_zeros(prefix + ".glu_bv", 1, out)) {}

TensorPtr Glu::forward(Graph& g, const TensorPtr& x) const {
    auto gate = g.sigmoid(g.add_rowvec(g.matmul(x, w_gate), b_gate));
    auto value = g.add_rowvec(g.matmul(x, w_value), b_value);
    return g.mul(gate, value);
}

Grn::Grn(WeightRegistry& reg, const std::string& prefix, int in, int hidden, int out,
         bool with_context, Rng& rng)
    : in_size(in),
      hidden_size(hidden),
      out_size(out),
      w_input(reg.create(prefix + ".w_in", in, hidden, in, rng)),
      b_input(reg.create_zeros(prefix + ".b_in", 1, hidden)),
      w_context(with_context ? reg.create(prefix + ".w_ctx", hidden, hidden, hidden, rng) : nullptr),
      w_hidden(reg.create(prefix + ".w_hid", hidden, out, hidden, rng)),
      b_hidden(reg.create_zeros(prefix + ".b_hid", 1, out)),
      glu(reg, prefix, out, out, rng),
      norm(reg, prefix, out),
      w_skip(in != out ? reg.create(prefix + ".w_skip", in, out, in, rng) : nullptr) {}

TensorPtr Grn::forward(Pass& p, const TensorPtr& x, const TensorPtr& context) const {
    Graph& g = p.g;
    if (context && !w_context)
        throw std::invalid_argument("grn: context supplied to a GRN built without a context projection");
    auto hidden = g.add_rowvec(g.matmul(x, w_input), b_input);
    if (context) {
        // context is 1 x hidden, projected then added to every row
        hidden = g.add_rowvec(hidden, g.matmul(context, w_context));
    }
    hidden = g.elu(hidden);
    auto pre_gate = apply_dropout(p, g.add_rowvec(g.matmul(hidden, w_hidden), b_hidden));
    auto gated = glu.forward(g, pre_gate);
    auto residual = w_skip ? g.matmul(x, w_skip) : x;
    return norm.apply(g, g.add(residual, gated));
}

ScalarEmbedding::ScalarEmbedding(WeightRegistry& reg, const std::string& prefix, int d_model, Rng& rng)
    : w(reg.create(prefix + ".w", 1, d_model, 1, rng)),
      b(reg.create_zeros(prefix + ".b", 1, d_model)) {}

TensorPtr ScalarEmbedding::forward(Graph& g, const TensorPtr& x) const {
    return g.add_rowvec(g.matmul(x, w), b);
}

LstmWeights::LstmWeights(WeightRegistry& reg, const std::string& prefix, int d, Rng& rng)
    : w_input_gate(reg.create(prefix + ".w_i", 2 * d, d, 2 * d, rng)),
      b_input_gate(reg.create_zeros(prefix + ".b_i", 1, d)),
      w_forget_gate(reg.create(prefix + ".w_f", 2 * d, d, 2 * d, rng)),
      b_forget_gate(reg.create_zeros(prefix + ".b_f", 1, d)),
      w_cell(reg.create(prefix + ".w_g", 2 * d, d, 2 * d, rng)),
      b_cell(reg.create_zeros(prefix + ".b_g", 1, d)),
      w_output_gate(reg.create(prefix + ".w_o", 2 * d, d, 2 * d, rng)),
      b_output_gate(reg.create_zeros(prefix + ".b_o", 1, d)),
      d_model(d) {}

LstmState lstm_cell(Graph& g, const LstmWeights& w, const TensorPtr& x, const LstmState& prev) {
    auto z = g.concat_cols({x, prev.h});
    auto i = g.sigmoid(g.add_rowvec(g.matmul(z, w.w_input_gate), w.b_input_gate));
    auto f = g.sigmoid(g.add_rowvec(g.matmul(z, w.w_forget_gate), w.b_forget_gate));
    auto cand = g.tanh(g.add_rowvec(g.matmul(z, w.w_cell), w.b_cell));
    auto o = g.sigmoid(g.add_rowvec(g.matmul(z, w.w_output_gate), w.b_output_gate));
    auto c = g.add(g.mul(f, prev.c), g.mul(i, cand));
    auto h = g.mul(o, g.tanh(c));
    return {h, c};
}

TensorPtr lstm_encode_decode(Graph& g, const LstmWeights& w, const TensorPtr& past,
                             const TensorPtr& future, const LstmState& init) {
    if (past->cols != w.d_model || future->cols != w.d_model)
        throw std::invalid_argument("lstm_encode_decode: feature width " +
                                    std::to_string(past->cols) + "/" + std::to_string(future->cols) +
                                    " does not match d_model " + std::to_string(w.d_model));
    std::vector<TensorPtr> hidden;
    hidden.reserve(past->rows + future->rows);
    LstmState state = init;
    for (const TensorPtr& segment : {past, future}) {
        for (int i = 0; i < segment->rows; ++i) {
            state = lstm_cell(g, w, g.slice_rows(segment, i, i + 1), state);
            hidden.push_back(state.h);
        }
    }
    return g.concat_rows(hidden);
}

VarSelWeights::VarSelWeights(WeightRegistry& reg, const std::string& prefix, int n_vars_,
                             int d_model_, bool with_context, Rng& rng)
    : n_vars(n_vars_), d_model(d_model_) {
    if (n_vars < 1) throw std::invalid_argument("variable selection needs at least one variable");
    var_grns.reserve(n_vars);
    for (int v = 0; v < n_vars; ++v)
        var_grns.emplace_back(reg, prefix + ".var" + std::to_string(v), d_model, d_model, d_model,
                              false, rng);
    if (n_vars > 1)
        sel_grn.emplace_back(reg, prefix + ".sel", n_vars * d_model, d_model, n_vars, with_context,
                             rng);
}

VarSelWeights::Result VarSelWeights::forward(Pass& p, const std::vector<TensorPtr>& embeddings,
                                             const TensorPtr& context) const {
    Graph& g = p.g;
    if (embeddings.empty()) throw std::invalid_argument("variable selection: empty variable list");
    if (static_cast<int>(embeddings.size()) != n_vars)
        throw std::invalid_argument("variable selection: got " + std::to_string(embeddings.size()) +
                                    " embeddings, built for " + std::to_string(n_vars));
    const int m = embeddings[0]->rows;

    TensorPtr weights;
    if (n_vars == 1) {
        weights = Tensor::full(m, 1, 1.0);
    } else {
        auto flat = g.concat_cols(embeddings);
        weights = g.softmax_rows(sel_grn[0].forward(p, flat, context));
    }

    TensorPtr combined;
    for (int v = 0; v < n_vars; ++v) {
        auto transformed = var_grns[v].forward(p, embeddings[v], nullptr);
        auto weighted = n_vars == 1 ? transformed
                                    : g.mul_colvec(transformed, g.slice_cols(weights, v, v + 1));
        combined = combined ? g.add(combined, weighted) : weighted;
    }
    return {combined, weights};
}

StaticEncoders::StaticEncoders(WeightRegistry& reg, const std::string& prefix, int d, Rng& rng)
    : selection_ctx(reg, prefix + ".ctx_sel", d, d, d, false, rng),
      cell_init(reg, prefix + ".ctx_cell", d, d, d, false, rng),
      hidden_init(reg, prefix + ".ctx_hidden", d, d, d, false, rng),
      enrichment_ctx(reg, prefix + ".ctx_enrich", d, d, d, false, rng) {}

StaticEncoders::Contexts StaticEncoders::forward(Pass& p, const TensorPtr& zeta) const {
    return {selection_ctx.forward(p, zeta, nullptr), cell_init.forward(p, zeta, nullptr),
            hidden_init.forward(p, zeta, nullptr), enrichment_ctx.forward(p, zeta, nullptr)};
}

} // namespace istft

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "istft/tensor.hpp"

namespace istft {

/// Ordered collection of named trainable tensors. Registration order is the
/// canonical weight order used for deterministic gradient accumulation,
/// optimizer state, and serialization.
class WeightRegistry {
public:
    TensorPtr create(const std::string& name, int rows, int cols, int fan_in, Rng& rng);
    TensorPtr create_zeros(const std::string& name, int rows, int cols);
    TensorPtr create_const(const std::string& name, int rows, int cols, double value);
    const std::vector<std::pair<std::string, TensorPtr>>& items() const { return items_; }
    TensorPtr find(const std::string& name) const;

private:
    std::vector<std::pair<std::string, TensorPtr>> items_;
};

/// Everything a forward pass needs besides its inputs: the tape, the
/// train/eval flag, and the dropout configuration.
struct Pass {
    Graph& g;
    bool train = false;
    double keep_prob = 1.0; // 1 - dropout rate
    Rng* rng = nullptr;     // dropout source; required when train && keep_prob < 1
};

TensorPtr apply_dropout(Pass& p, const TensorPtr& x);

struct LayerNormParams {
    TensorPtr gain, bias;
    LayerNormParams(WeightRegistry& reg, const std::string& prefix, int dim);
    TensorPtr apply(Graph& g, const TensorPtr& x) const;
};

/// Gated linear unit: sigmoid(x W_g + b_g) * (x W_v + b_v).
struct Glu {
    TensorPtr w_gate, b_gate, w_value, b_value;
    Glu(WeightRegistry& reg, const std::string& prefix, int in, int out, Rng& rng);
    TensorPtr forward(Graph& g, const TensorPtr& x) const;
};

/// Gated residual network. ELU projection, gated output, residual add &
/// layer-norm; a skip adapter is present exactly when in_size != out_size,
/// and the context projection exactly when built with_context.
struct Grn {
    int in_size, hidden_size, out_size;
    TensorPtr w_input, b_input;  // in -> hidden
    TensorPtr w_context;         // d_model -> hidden, no bias; null without context
    TensorPtr w_hidden, b_hidden; // hidden -> out
    Glu glu;                     // out -> out
    LayerNormParams norm;
    TensorPtr w_skip;            // in -> out; null when in == out

    Grn(WeightRegistry& reg, const std::string& prefix, int in, int hidden, int out,
        bool with_context, Rng& rng);
    /// context may be null; supplying one to a context-free GRN is an error.
    TensorPtr forward(Pass& p, const TensorPtr& x, const TensorPtr& context) const;
};

/// Scalar-to-d_model linear embedding for one real-valued variable.
struct ScalarEmbedding {
    TensorPtr w, b; // both 1 x d
    ScalarEmbedding(WeightRegistry& reg, const std::string& prefix, int d_model, Rng& rng);
    TensorPtr forward(Graph& g, const TensorPtr& x) const; // x: M x 1
};

struct LstmWeights {
    // gate matrices are (2 d_model) x d_model over [x, h]
    TensorPtr w_input_gate, b_input_gate;
    TensorPtr w_forget_gate, b_forget_gate;
    TensorPtr w_cell, b_cell;
    TensorPtr w_output_gate, b_output_gate;
    int d_model;
    LstmWeights(WeightRegistry& reg, const std::string& prefix, int d_model, Rng& rng);
};

struct LstmState {
    TensorPtr h, c; // 1 x d_model each
};

LstmState lstm_cell(Graph& g, const LstmWeights& w, const TensorPtr& x, const LstmState& prev);

/// Run the cell over past rows, then future rows continuing the same state,
/// and return the hidden trajectory [ (past_rows + future_rows) x d_model ].
TensorPtr lstm_encode_decode(Graph& g, const LstmWeights& w, const TensorPtr& past,
                             const TensorPtr& future, const LstmState& init);

/// Variable selection: per-variable GRNs plus a selection softmax over the
/// flattened embeddings. The selection GRN is omitted for a single variable,
/// whose weight is the constant 1.
struct VarSelWeights {
    int n_vars, d_model;
    std::vector<Grn> var_grns;
    std::vector<Grn> sel_grn; // empty or one element
    VarSelWeights(WeightRegistry& reg, const std::string& prefix, int n_vars, int d_model,
                  bool with_context, Rng& rng);

    struct Result {
        TensorPtr combined; // M x d_model
        TensorPtr weights;  // M x n_vars, rows sum to 1
    };
    Result forward(Pass& p, const std::vector<TensorPtr>& embeddings, const TensorPtr& context) const;
};

/// Four GRN encoders mapping the selected static embedding to the context
/// vectors consumed elsewhere in the network.
struct StaticEncoders {
    Grn selection_ctx, cell_init, hidden_init, enrichment_ctx;
    StaticEncoders(WeightRegistry& reg, const std::string& prefix, int d_model, Rng& rng);

    struct Contexts {
        TensorPtr c_selection, c_cell, c_hidden, c_enrichment; // 1 x d_model each
    };
    Contexts forward(Pass& p, const TensorPtr& zeta) const;
};

} // namespace istft

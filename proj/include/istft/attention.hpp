#pragma once

#include "istft/layers.hpp"
#include "istft/tensor.hpp"

namespace istft::attention {

/// Attention mask over a spatial-temporal sequence of n_t time blocks of
/// n_o positions each. Block (i, j) is allowed iff j <= i: future time
/// blocks are hidden, while positions inside one block (the n_o outputs of
/// one time instance) interact freely.
struct BlockMask {
    int n_t = 0;
    int n_o = 0;
    int M = 0;                    // n_t * n_o
    std::vector<uint8_t> allowed; // M x M row-major

    bool is_allowed(int r, int c) const { return allowed[static_cast<size_t>(r) * M + c] != 0; }
};

BlockMask build_block_mask(int n_t, int n_o);

/// Interpretable multi-head attention weights: per-head query/key
/// projections with a value projection shared across heads, so the
/// head-averaged weight matrix acts like a single attention matrix.
struct AttentionWeights {
    int n_heads = 1;
    int d_model = 0;
    int d_head = 0; // d_model / n_heads, also the value width
    std::vector<TensorPtr> w_query, w_key; // per head, d_model x d_head
    TensorPtr w_value;                     // shared, d_model x d_head
    TensorPtr w_out;                       // d_head x d_model

    AttentionWeights(WeightRegistry& reg, const std::string& prefix, int d_model, int n_heads,
                     Rng& rng);
};

struct MhaResult {
    TensorPtr output;    // M x d_model
    TensorPtr attention; // M x M head average; masked entries exactly 0
};

/// Scaled dot-product attention per head under the block mask, head
/// matrices averaged into a single row-stochastic attention matrix that
/// both weights the shared values and is returned for export.
MhaResult interpretable_mha(Graph& g, const TensorPtr& theta, const AttentionWeights& w,
                            const BlockMask& mask);

} // namespace istft::attention

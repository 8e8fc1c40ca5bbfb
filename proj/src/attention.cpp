#include "istft/attention.hpp"

#include <cmath>

namespace istft::attention {

BlockMask build_block_mask(int n_t, int n_o) {
    if (n_t < 1 || n_o < 1)
        throw ConfigError("block mask: n_t and n_o must be >= 1, got n_t=" + std::to_string(n_t) +
                          ", n_o=" + std::to_string(n_o));
    BlockMask mask;
    mask.n_t = n_t;
    mask.n_o = n_o;
    mask.M = n_t * n_o;
    mask.allowed.assign(static_cast<size_t>(mask.M) * mask.M, 0);
    for (int r = 0; r < mask.M; ++r)
        for (int c = 0; c < mask.M; ++c)
            if (c / n_o <= r / n_o) mask.allowed[static_cast<size_t>(r) * mask.M + c] = 1;
    return mask;
}

AttentionWeights::AttentionWeights(WeightRegistry& reg, const std::string& prefix, int d_model_,
                                   int n_heads_, Rng& rng)
    : n_heads(n_heads_), d_model(d_model_) {
    if (n_heads < 1 || d_model < 1 || d_model % n_heads != 0)
        throw ConfigError("attention: d_model " + std::to_string(d_model) +
                          " not divisible by n_heads " + std::to_string(n_heads));
    d_head = d_model / n_heads;
    for (int h = 0; h < n_heads; ++h) {
        w_query.push_back(reg.create(prefix + ".wq" + std::to_string(h), d_model, d_head, d_model, rng));
        w_key.push_back(reg.create(prefix + ".wk" + std::to_string(h), d_model, d_head, d_model, rng));
    }
    w_value = reg.create(prefix + ".wv", d_model, d_head, d_model, rng);
    w_out = reg.create(prefix + ".wo", d_head, d_model, d_head, rng);
}

MhaResult interpretable_mha(Graph& g, const TensorPtr& theta, const AttentionWeights& w,
                            const BlockMask& mask) {
    if (theta->rows != mask.M)
        throw std::invalid_argument("attention: sequence length " + std::to_string(theta->rows) +
                                    " does not match mask M=" + std::to_string(mask.M));
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.d_head));
    auto values = g.matmul(theta, w.w_value);

    TensorPtr head_sum;
    for (int h = 0; h < w.n_heads; ++h) {
        auto q = g.matmul(theta, w.w_query[h]);
        auto k = g.matmul(theta, w.w_key[h]);
        auto logits = g.scale(g.matmul(q, g.transpose(k)), scale);
        auto head = g.masked_softmax(logits, mask.allowed);
        head_sum = head_sum ? g.add(head_sum, head) : head;
    }
    auto averaged = w.n_heads == 1 ? head_sum : g.scale(head_sum, 1.0 / w.n_heads);
    auto output = g.matmul(g.matmul(averaged, values), w.w_out);
    return {output, averaged};
}

} // namespace istft::attention

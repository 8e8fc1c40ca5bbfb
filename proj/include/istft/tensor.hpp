#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "istft/common.hpp"

namespace istft {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major rank-2 tensor of 64-bit floats. Vectors are 1 x n or
/// n x 1, scalars 1 x 1. Graph-produced tensors have leaf == false and are
/// immutable after creation; only grad buffers mutate during backward.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;
    bool requires_grad = false;
    bool leaf = true;
    std::vector<double> grad; // empty until first backward touch

    static TensorPtr zeros(int r, int c, bool requires_grad = false);
    static TensorPtr full(int r, int c, double value, bool requires_grad = false);
    static TensorPtr from(std::vector<double> values, int r, int c, bool requires_grad = false);
    static TensorPtr scalar(double value, bool requires_grad = false);
    /// Entries drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    static TensorPtr uniform_init(int r, int c, int fan_in, Rng& rng);

    int numel() const { return rows * cols; }
    std::vector<int> shape() const { return {rows, cols}; }
    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
    double value() const; // requires 1 x 1

    void ensure_grad();
    void zero_grad();
};

/// Per-leaf gradient buffers keyed by tensor identity. Used to route weight
/// gradients out of a backward pass when several graphs over shared weights
/// run concurrently.
using LeafGradMap = std::unordered_map<const Tensor*, std::vector<double>>;

/// Tape of recorded operations. Each op executes its forward rule eagerly and
/// pushes a backward closure; backward() replays the closures in exact
/// reverse recording order. One Graph per forward pass; a Graph is
/// single-threaded, but independent Graphs over shared read-only leaves may
/// run in parallel when each routes leaf gradients into its own LeafGradMap.
class Graph {
public:
    // -- core --
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    /// Row-wise softmax with entries where allowed[r*cols+c] == 0 forced to
    /// exact zero via an additive -1e9 on the logits. Every row needs at
    /// least one allowed entry.
    TensorPtr masked_softmax(const TensorPtr& logits, const std::vector<uint8_t>& allowed);
    TensorPtr softmax_rows(const TensorPtr& logits);

    // -- elementwise --
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr scale(const TensorPtr& a, double s);
    TensorPtr sigmoid(const TensorPtr& a);
    TensorPtr tanh(const TensorPtr& a);
    TensorPtr elu(const TensorPtr& a);
    TensorPtr abs(const TensorPtr& a);

    // -- broadcast helpers (the only broadcasting the engine provides) --
    /// a[m x n] + row vector v[1 x n] added to every row.
    TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& v);
    /// a[m x n] scaled per-row by column vector v[m x 1].
    TensorPtr mul_colvec(const TensorPtr& a, const TensorPtr& v);

    // -- structure --
    TensorPtr transpose(const TensorPtr& a);
    /// Reinterpret the row-major buffer under a new shape (numel preserved).
    TensorPtr reshape(const TensorPtr& a, int r, int c);
    TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
    TensorPtr concat_cols(const std::vector<TensorPtr>& parts);
    TensorPtr slice_rows(const TensorPtr& a, int r0, int r1);
    TensorPtr slice_cols(const TensorPtr& a, int c0, int c1);

    // -- normalization / regularization --
    /// Normalize each row to mean 0, variance 1 (eps = 1e-6), then apply the
    /// per-column affine gain/shift.
    TensorPtr layer_norm(const TensorPtr& a, const TensorPtr& gain, const TensorPtr& bias);
    /// Inverted dropout. keep_prob in (0,1]; identity in eval mode.
    TensorPtr dropout(const TensorPtr& a, double keep_prob, Rng& rng, bool train);

    // -- reductions / losses --
    TensorPtr sum(const TensorPtr& a);
    /// Euclidean norm of each row -> [m x 1]. Zero rows get zero gradient.
    TensorPtr rows_l2norm(const TensorPtr& a);
    /// Elementwise pinball loss q*(y-p)_+ + (1-q)*(p-y)_+ against a constant
    /// target; gradients flow to pred only.
    TensorPtr pinball(const TensorPtr& pred, const TensorPtr& target, double q);

    /// Reverse sweep from a scalar loss. Accumulates into existing grads.
    /// When leaf_grads is given, gradients of leaf tensors are accumulated
    /// there instead of in Tensor::grad.
    void backward(const TensorPtr& loss, LeafGradMap* leaf_grads = nullptr);

    size_t size() const { return steps_.size(); }

private:
    struct Step {
        TensorPtr out; // skip the closure when out never received gradient
        std::function<void()> backward;
    };
    std::vector<Step> steps_;
    LeafGradMap* sink_ = nullptr;

    TensorPtr make_output(int r, int c, bool requires_grad);
    void record(TensorPtr out, std::function<void()> fn) {
        steps_.push_back({std::move(out), std::move(fn)});
    }
    double* grad_buf(Tensor& t);
    static bool wants_grad(const Tensor& t) { return !t.leaf || t.requires_grad; }

    TensorPtr binary_elementwise(const TensorPtr& a, const TensorPtr& b, int kind);
    TensorPtr unary_elementwise(const TensorPtr& a, int kind);
};

} // namespace istft

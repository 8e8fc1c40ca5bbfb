#include "istft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "istft/kernels.hpp"

namespace istft {

std::string format_shape(int rows, int cols) {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

TensorPtr Tensor::zeros(int r, int c, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->rows = r;
    t->cols = c;
    t->data.assign(static_cast<size_t>(r) * c, 0.0);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::full(int r, int c, double value, bool requires_grad) {
    auto t = zeros(r, c, requires_grad);
    std::fill(t->data.begin(), t->data.end(), value);
    return t;
}

TensorPtr Tensor::from(std::vector<double> values, int r, int c, bool requires_grad) {
    if (static_cast<size_t>(r) * c != values.size())
        throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) +
                                    " values cannot fill " + format_shape(r, c));
    auto t = std::make_shared<Tensor>();
    t->rows = r;
    t->cols = c;
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
    return from({value}, 1, 1, requires_grad);
}

TensorPtr Tensor::uniform_init(int r, int c, int fan_in, Rng& rng) {
    auto t = zeros(r, c, true);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t->data) v = rng.uniform(-bound, bound);
    return t;
}

double Tensor::value() const {
    if (rows != 1 || cols != 1)
        throw std::invalid_argument("Tensor::value: tensor is " + format_shape(rows, cols) +
                                    ", not scalar");
    return data[0];
}

void Tensor::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

TensorPtr Graph::make_output(int r, int c, bool requires_grad) {
    auto t = Tensor::zeros(r, c, requires_grad);
    t->leaf = false;
    return t;
}

double* Graph::grad_buf(Tensor& t) {
    if (t.leaf && sink_) {
        auto& buf = (*sink_)[&t];
        if (buf.empty()) buf.assign(t.data.size(), 0.0);
        return buf.data();
    }
    t.ensure_grad();
    return t.grad.data();
}

// ---------------------------------------------------------------- matmul

TensorPtr Graph::matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols != b->rows)
        throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                    format_shape(a->rows, a->cols) + " * " +
                                    format_shape(b->rows, b->cols));
    const int m = a->rows, k = a->cols, n = b->cols;
    auto out = make_output(m, n, wants_grad(*a) || wants_grad(*b));
    kernels::matmul(a->data.data(), b->data.data(), out->data.data(), m, k, n);
    record(out, [this, a, b, out, m, k, n] {
        const double* dc = out->grad.data();
        if (wants_grad(*a)) // dA = dC * B^T
            kernels::matmul_nt(dc, b->data.data(), grad_buf(*a), m, n, k, true);
        if (wants_grad(*b)) // dB = A^T * dC
            kernels::matmul_tn(a->data.data(), dc, grad_buf(*b), k, m, n, true);
    });
    return out;
}

// ------------------------------------------------------------- softmaxes

TensorPtr Graph::masked_softmax(const TensorPtr& logits, const std::vector<uint8_t>& allowed) {
    const int m = logits->rows, n = logits->cols;
    if (allowed.size() != static_cast<size_t>(m) * n)
        throw std::invalid_argument("masked_softmax: mask has " + std::to_string(allowed.size()) +
                                    " entries for logits " + format_shape(m, n));
    auto out = make_output(m, n, wants_grad(*logits));
    for (int i = 0; i < m; ++i) {
        const double* li = &logits->data[static_cast<size_t>(i) * n];
        double* oi = &out->data[static_cast<size_t>(i) * n];
        const uint8_t* mi = &allowed[static_cast<size_t>(i) * n];
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (int j = 0; j < n; ++j) {
            const double v = mi[j] ? li[j] : li[j] - 1e9;
            if (mi[j]) any = true;
            mx = std::max(mx, v);
        }
        if (!any)
            throw std::invalid_argument("masked_softmax: row " + std::to_string(i) +
                                        " is fully masked");
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            const double v = mi[j] ? li[j] : li[j] - 1e9;
            oi[j] = std::exp(v - mx); // masked entries underflow to exact 0
            z += oi[j];
        }
        for (int j = 0; j < n; ++j) oi[j] /= z;
    }
    if (wants_grad(*logits)) {
        record(out, [this, logits, out, m, n] {
            double* dl = grad_buf(*logits);
            for (int i = 0; i < m; ++i) {
                const double* s = &out->data[static_cast<size_t>(i) * n];
                const double* ds = &out->grad[static_cast<size_t>(i) * n];
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += s[j] * ds[j];
                for (int j = 0; j < n; ++j) dl[static_cast<size_t>(i) * n + j] += s[j] * (ds[j] - dot);
            }
        });
    }
    return out;
}

TensorPtr Graph::softmax_rows(const TensorPtr& logits) {
    const std::vector<uint8_t> open(static_cast<size_t>(logits->rows) * logits->cols, 1);
    return masked_softmax(logits, open);
}

// ------------------------------------------------------------ elementwise

namespace {
enum BinKind { kAdd, kSub, kMul };
enum UnKind { kSigmoid, kTanh, kElu, kAbs };
} // namespace

TensorPtr Graph::binary_elementwise(const TensorPtr& a, const TensorPtr& b, int kind) {
    if (a->rows != b->rows || a->cols != b->cols)
        throw std::invalid_argument("elementwise op: shapes differ: " +
                                    format_shape(a->rows, a->cols) + " vs " +
                                    format_shape(b->rows, b->cols));
    const int n = a->numel();
    auto out = make_output(a->rows, a->cols, wants_grad(*a) || wants_grad(*b));
    for (int i = 0; i < n; ++i) {
        switch (kind) {
        case kAdd: out->data[i] = a->data[i] + b->data[i]; break;
        case kSub: out->data[i] = a->data[i] - b->data[i]; break;
        case kMul: out->data[i] = a->data[i] * b->data[i]; break;
        }
    }
    record(out, [this, a, b, out, n, kind] {
        const double* d = out->grad.data();
        if (wants_grad(*a)) {
            double* ga = grad_buf(*a);
            for (int i = 0; i < n; ++i) ga[i] += kind == kMul ? d[i] * b->data[i] : d[i];
        }
        if (wants_grad(*b)) {
            double* gb = grad_buf(*b);
            for (int i = 0; i < n; ++i)
                gb[i] += kind == kMul ? d[i] * a->data[i] : (kind == kSub ? -d[i] : d[i]);
        }
    });
    return out;
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) { return binary_elementwise(a, b, kAdd); }
TensorPtr Graph::sub(const TensorPtr& a, const TensorPtr& b) { return binary_elementwise(a, b, kSub); }
TensorPtr Graph::mul(const TensorPtr& a, const TensorPtr& b) { return binary_elementwise(a, b, kMul); }

TensorPtr Graph::unary_elementwise(const TensorPtr& a, int kind) {
    const int n = a->numel();
    auto out = make_output(a->rows, a->cols, wants_grad(*a));
    for (int i = 0; i < n; ++i) {
        const double x = a->data[i];
        switch (kind) {
        case kSigmoid: out->data[i] = 1.0 / (1.0 + std::exp(-x)); break;
        case kTanh: out->data[i] = std::tanh(x); break;
        case kElu: out->data[i] = x > 0.0 ? x : std::expm1(x); break;
        case kAbs: out->data[i] = std::fabs(x); break;
        }
    }
    if (!wants_grad(*a)) return out;
    record(out, [this, a, out, n, kind] {
        double* ga = grad_buf(*a);
        const double* d = out->grad.data();
        for (int i = 0; i < n; ++i) {
            double dx = 0.0;
            const double y = out->data[i];
            switch (kind) {
            case kSigmoid: dx = y * (1.0 - y); break;
            case kTanh: dx = 1.0 - y * y; break;
            case kElu: dx = a->data[i] > 0.0 ? 1.0 : y + 1.0; break;
            case kAbs: dx = a->data[i] > 0.0 ? 1.0 : (a->data[i] < 0.0 ? -1.0 : 0.0); break;
            }
            ga[i] += d[i] * dx;
        }
    });
    return out;
}

TensorPtr Graph::sigmoid(const TensorPtr& a) { return unary_elementwise(a, kSigmoid); }
TensorPtr Graph::tanh(const TensorPtr& a) { return unary_elementwise(a, kTanh); }
TensorPtr Graph::elu(const TensorPtr& a) { return unary_elementwise(a, kElu); }
TensorPtr Graph::abs(const TensorPtr& a) { return unary_elementwise(a, kAbs); }

TensorPtr Graph::scale(const TensorPtr& a, double s) {
    const int n = a->numel();
    auto out = make_output(a->rows, a->cols, wants_grad(*a));
    for (int i = 0; i < n; ++i) out->data[i] = a->data[i] * s;
    if (!wants_grad(*a)) return out;
    record(out, [this, a, out, n, s] {
        double* ga = grad_buf(*a);
        for (int i = 0; i < n; ++i) ga[i] += out->grad[i] * s;
    });
    return out;
}

// ------------------------------------------------------------- broadcast

TensorPtr Graph::add_rowvec(const TensorPtr& a, const TensorPtr& v) {
    if (v->rows != 1 || v->cols != a->cols)
        throw std::invalid_argument("add_rowvec: vector " + format_shape(v->rows, v->cols) +
                                    " incompatible with " + format_shape(a->rows, a->cols));
    const int m = a->rows, n = a->cols;
    auto out = make_output(m, n, wants_grad(*a) || wants_grad(*v));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->at(i, j) = a->at(i, j) + v->data[j];
    record(out, [this, a, v, out, m, n] {
        if (wants_grad(*a)) {
            double* ga = grad_buf(*a);
            for (int i = 0; i < m * n; ++i) ga[i] += out->grad[i];
        }
        if (wants_grad(*v)) {
            double* gv = grad_buf(*v);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) gv[j] += out->grad[static_cast<size_t>(i) * n + j];
        }
    });
    return out;
}

TensorPtr Graph::mul_colvec(const TensorPtr& a, const TensorPtr& v) {
    if (v->cols != 1 || v->rows != a->rows)
        throw std::invalid_argument("mul_colvec: vector " + format_shape(v->rows, v->cols) +
                                    " incompatible with " + format_shape(a->rows, a->cols));
    const int m = a->rows, n = a->cols;
    auto out = make_output(m, n, wants_grad(*a) || wants_grad(*v));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->at(i, j) = a->at(i, j) * v->data[i];
    record(out, [this, a, v, out, m, n] {
        if (wants_grad(*a)) {
            double* ga = grad_buf(*a);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    ga[static_cast<size_t>(i) * n + j] += out->grad[static_cast<size_t>(i) * n + j] * v->data[i];
        }
        if (wants_grad(*v)) {
            double* gv = grad_buf(*v);
            for (int i = 0; i < m; ++i) {
                double s = 0.0;
                for (int j = 0; j < n; ++j)
                    s += out->grad[static_cast<size_t>(i) * n + j] * a->data[static_cast<size_t>(i) * n + j];
                gv[i] += s;
            }
        }
    });
    return out;
}

// -------------------------------------------------------------- structure

TensorPtr Graph::transpose(const TensorPtr& a) {
    const int m = a->rows, n = a->cols;
    auto out = make_output(n, m, wants_grad(*a));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->at(j, i) = a->at(i, j);
    if (!wants_grad(*a)) return out;
    record(out, [this, a, out, m, n] {
        double* ga = grad_buf(*a);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) ga[static_cast<size_t>(i) * n + j] += out->grad[static_cast<size_t>(j) * m + i];
    });
    return out;
}

TensorPtr Graph::reshape(const TensorPtr& a, int r, int c) {
    if (r * c != a->numel())
        throw std::invalid_argument("reshape: cannot view " + format_shape(a->rows, a->cols) +
                                    " as " + format_shape(r, c));
    auto out = make_output(r, c, wants_grad(*a));
    out->data = a->data;
    if (!wants_grad(*a)) return out;
    record(out, [this, a, out] {
        double* ga = grad_buf(*a);
        for (int i = 0; i < a->numel(); ++i) ga[i] += out->grad[i];
    });
    return out;
}

TensorPtr Graph::concat_rows(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no tensors given");
    const int n = parts[0]->cols;
    int m = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p->cols != n)
            throw std::invalid_argument("concat_rows: column mismatch " +
                                        format_shape(p->rows, p->cols) + " vs n=" + std::to_string(n));
        m += p->rows;
        rg = rg || wants_grad(*p);
    }
    auto out = make_output(m, n, rg);
    int r = 0;
    for (const auto& p : parts) {
        std::copy(p->data.begin(), p->data.end(), out->data.begin() + static_cast<size_t>(r) * n);
        r += p->rows;
    }
    record(out, [this, parts, out, n] {
        int r0 = 0;
        for (const auto& p : parts) {
            if (wants_grad(*p)) {
                double* gp = grad_buf(*p);
                const double* d = out->grad.data() + static_cast<size_t>(r0) * n;
                for (int i = 0; i < p->numel(); ++i) gp[i] += d[i];
            }
            r0 += p->rows;
        }
    });
    return out;
}

TensorPtr Graph::concat_cols(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no tensors given");
    const int m = parts[0]->rows;
    int n = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p->rows != m)
            throw std::invalid_argument("concat_cols: row mismatch " +
                                        format_shape(p->rows, p->cols) + " vs m=" + std::to_string(m));
        n += p->cols;
        rg = rg || wants_grad(*p);
    }
    auto out = make_output(m, n, rg);
    int c = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < m; ++i)
            std::copy(p->data.begin() + static_cast<size_t>(i) * p->cols,
                      p->data.begin() + static_cast<size_t>(i + 1) * p->cols,
                      out->data.begin() + static_cast<size_t>(i) * n + c);
        c += p->cols;
    }
    record(out, [this, parts, out, m, n] {
        int c0 = 0;
        for (const auto& p : parts) {
            if (wants_grad(*p)) {
                double* gp = grad_buf(*p);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < p->cols; ++j)
                        gp[static_cast<size_t>(i) * p->cols + j] +=
                            out->grad[static_cast<size_t>(i) * n + c0 + j];
            }
            c0 += p->cols;
        }
    });
    return out;
}

TensorPtr Graph::slice_rows(const TensorPtr& a, int r0, int r1) {
    if (r0 < 0 || r1 > a->rows || r0 >= r1)
        throw std::invalid_argument("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) +
                                    ") out of range for " + format_shape(a->rows, a->cols));
    const int n = a->cols, m = r1 - r0;
    auto out = make_output(m, n, wants_grad(*a));
    std::copy(a->data.begin() + static_cast<size_t>(r0) * n, a->data.begin() + static_cast<size_t>(r1) * n,
              out->data.begin());
    if (!wants_grad(*a)) return out;
    record(out, [this, a, out, r0, m, n] {
        double* ga = grad_buf(*a) + static_cast<size_t>(r0) * n;
        for (int i = 0; i < m * n; ++i) ga[i] += out->grad[i];
    });
    return out;
}

TensorPtr Graph::slice_cols(const TensorPtr& a, int c0, int c1) {
    if (c0 < 0 || c1 > a->cols || c0 >= c1)
        throw std::invalid_argument("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) +
                                    ") out of range for " + format_shape(a->rows, a->cols));
    const int m = a->rows, n = c1 - c0, an = a->cols;
    auto out = make_output(m, n, wants_grad(*a));
    for (int i = 0; i < m; ++i)
        std::copy(a->data.begin() + static_cast<size_t>(i) * an + c0,
                  a->data.begin() + static_cast<size_t>(i) * an + c1,
                  out->data.begin() + static_cast<size_t>(i) * n);
    if (!wants_grad(*a)) return out;
    record(out, [this, a, out, c0, m, n, an] {
        double* ga = grad_buf(*a);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                ga[static_cast<size_t>(i) * an + c0 + j] += out->grad[static_cast<size_t>(i) * n + j];
    });
    return out;
}

// ----------------------------------------------------- norm / regularize

TensorPtr Graph::layer_norm(const TensorPtr& a, const TensorPtr& gain, const TensorPtr& bias) {
    const int m = a->rows, n = a->cols;
    if (gain->rows != 1 || gain->cols != n || bias->rows != 1 || bias->cols != n)
        throw std::invalid_argument("layer_norm: affine params must be [1x" + std::to_string(n) +
                                    "], got gain " + format_shape(gain->rows, gain->cols) + ", bias " +
                                    format_shape(bias->rows, bias->cols));
    constexpr double eps = 1e-6;
    auto out = make_output(m, n, wants_grad(*a) || wants_grad(*gain) || wants_grad(*bias));
    // cache per-row mean and inverse stddev for the backward rule
    auto cache = std::make_shared<std::vector<double>>(static_cast<size_t>(m) * 2);
    for (int i = 0; i < m; ++i) {
        const double* x = &a->data[static_cast<size_t>(i) * n];
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (x[j] - mean) * (x[j] - mean);
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        (*cache)[2 * i] = mean;
        (*cache)[2 * i + 1] = inv;
        for (int j = 0; j < n; ++j)
            out->at(i, j) = (x[j] - mean) * inv * gain->data[j] + bias->data[j];
    }
    record(out, [this, a, gain, bias, out, cache, m, n] {
        for (int i = 0; i < m; ++i) {
            const double* x = &a->data[static_cast<size_t>(i) * n];
            const double* d = &out->grad[static_cast<size_t>(i) * n];
            const double mean = (*cache)[2 * i], inv = (*cache)[2 * i + 1];
            if (wants_grad(*gain)) {
                double* gg = grad_buf(*gain);
                for (int j = 0; j < n; ++j) gg[j] += d[j] * (x[j] - mean) * inv;
            }
            if (wants_grad(*bias)) {
                double* gb = grad_buf(*bias);
                for (int j = 0; j < n; ++j) gb[j] += d[j];
            }
            if (wants_grad(*a)) {
                double* ga = grad_buf(*a) + static_cast<size_t>(i) * n;
                double sum_dh = 0.0, sum_dh_xhat = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double dh = d[j] * gain->data[j];
                    sum_dh += dh;
                    sum_dh_xhat += dh * (x[j] - mean) * inv;
                }
                for (int j = 0; j < n; ++j) {
                    const double xhat = (x[j] - mean) * inv;
                    const double dh = d[j] * gain->data[j];
                    ga[j] += inv * (dh - sum_dh / n - xhat * sum_dh_xhat / n);
                }
            }
        }
    });
    return out;
}

TensorPtr Graph::dropout(const TensorPtr& a, double keep_prob, Rng& rng, bool train) {
    if (!(keep_prob > 0.0 && keep_prob <= 1.0))
        throw ConfigError("dropout: keep probability " + std::to_string(keep_prob) +
                          " outside (0, 1]");
    if (!train || keep_prob == 1.0) return a;
    const int n = a->numel();
    auto mask = std::make_shared<std::vector<double>>(n);
    const double inv = 1.0 / keep_prob;
    for (int i = 0; i < n; ++i) (*mask)[i] = rng.u01() < keep_prob ? inv : 0.0;
    auto out = make_output(a->rows, a->cols, wants_grad(*a));
    for (int i = 0; i < n; ++i) out->data[i] = a->data[i] * (*mask)[i];
    if (!wants_grad(*a)) return out;
    record(out, [this, a, out, mask, n] {
        double* ga = grad_buf(*a);
        for (int i = 0; i < n; ++i) ga[i] += out->grad[i] * (*mask)[i];
    });
    return out;
}

// ----------------------------------------------------------- reductions

TensorPtr Graph::sum(const TensorPtr& a) {
    auto out = make_output(1, 1, wants_grad(*a));
    double s = 0.0;
    for (double v : a->data) s += v;
    out->data[0] = s;
    if (!wants_grad(*a)) return out;
    record(out, [this, a, out] {
        double* ga = grad_buf(*a);
        const double d = out->grad[0];
        for (int i = 0; i < a->numel(); ++i) ga[i] += d;
    });
    return out;
}

TensorPtr Graph::rows_l2norm(const TensorPtr& a) {
    const int m = a->rows, n = a->cols;
    auto out = make_output(m, 1, wants_grad(*a));
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += a->at(i, j) * a->at(i, j);
        out->data[i] = std::sqrt(s);
    }
    if (!wants_grad(*a)) return out;
    record(out, [this, a, out, m, n] {
        double* ga = grad_buf(*a);
        for (int i = 0; i < m; ++i) {
            const double norm = out->data[i];
            if (norm == 0.0) continue;
            const double d = out->grad[i] / norm;
            for (int j = 0; j < n; ++j)
                ga[static_cast<size_t>(i) * n + j] += d * a->data[static_cast<size_t>(i) * n + j];
        }
    });
    return out;
}

TensorPtr Graph::pinball(const TensorPtr& pred, const TensorPtr& target, double q) {
    if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("pinball: quantile " + std::to_string(q) + " outside (0, 1)");
    if (pred->rows != target->rows || pred->cols != target->cols)
        throw std::invalid_argument("pinball: shapes differ: " + format_shape(pred->rows, pred->cols) +
                                    " vs " + format_shape(target->rows, target->cols));
    const int n = pred->numel();
    auto out = make_output(pred->rows, pred->cols, wants_grad(*pred));
    for (int i = 0; i < n; ++i) {
        const double diff = target->data[i] - pred->data[i];
        out->data[i] = q * std::max(0.0, diff) + (1.0 - q) * std::max(0.0, -diff);
    }
    if (!wants_grad(*pred)) return out;
    record(out, [this, pred, target, out, n, q] {
        double* gp = grad_buf(*pred);
        for (int i = 0; i < n; ++i) {
            const double diff = target->data[i] - pred->data[i];
            const double dx = diff > 0.0 ? -q : (diff < 0.0 ? 1.0 - q : 0.0);
            gp[i] += out->grad[i] * dx;
        }
    });
    return out;
}

// ------------------------------------------------------------- backward

void Graph::backward(const TensorPtr& loss, LeafGradMap* leaf_grads) {
    if (loss->rows != 1 || loss->cols != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    format_shape(loss->rows, loss->cols));
    sink_ = leaf_grads;
    // intermediates restart from zero each sweep; leaf grads accumulate
    for (auto& step : steps_) step.out->zero_grad();
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it)
        if (!it->out->grad.empty()) it->backward();
    sink_ = nullptr;
}

} // namespace istft

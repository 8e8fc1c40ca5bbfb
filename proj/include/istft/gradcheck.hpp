#pragma once

#include <functional>
#include <string>
#include <vector>

#include "istft/tensor.hpp"

namespace istft::gradcheck {

/// Central finite difference of eval() w.r.t. element idx of t, step h.
/// eval() must recompute the scalar from the tensor's current contents.
double fd_derivative(Tensor& t, int idx, const std::function<double()>& eval, double h = 1e-5);

/// Mixed absolute/relative error: |a - n| / max(1, |a|, |n|).
double rel_err(double analytic, double numeric);

struct OpCheck {
    std::string name;
    double max_rel_err;
};

/// Gradient-check every registered tensor op against central finite
/// differences on seeded random inputs. Pass threshold is 1e-5.
std::vector<OpCheck> check_all_ops(uint64_t seed);

/// Gradient-check the assembled forecaster on a toy configuration: backward
/// grads of a random subsample of weight entries vs finite differences.
/// Returns the worst mixed error over the sample. Pass threshold is 1e-4.
double check_model(uint64_t seed, int sampled_weights);

} // namespace istft::gradcheck

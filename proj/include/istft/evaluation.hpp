#pragma once

#include <string>
#include <vector>

#include "istft/model.hpp"

namespace istft {

enum class ErrorMode { absolute, relative };

struct ErrorMeasure {
    double epsilon = 0.0;
    ErrorMode mode = ErrorMode::absolute;
};

/// Windowed forecast error for one output: mean absolute error when the mean
/// magnitude of the reference over steps n_k..n_t is at most 1, mean
/// relative error otherwise. Both series span the full window (length n_t,
/// 1-based step i); only steps i = n_k..n_t contribute, and the divisor is
/// n_t. Relative denominators are floored at 1e-12.
ErrorMeasure error_measure(const std::vector<double>& pred, const std::vector<double>& ref,
                           int n_k, int n_t);

struct CaseError {
    int64_t group_id = 0;
    int window_index = 0;
    int output_id = 1; // 1-based
    ErrorMeasure m;
};

struct EvalSummary {
    int n_cases = 0;                    // windows scored
    std::vector<double> mean_eps;       // per output id
    std::vector<double> fraction_below; // per output id, eps < threshold
    double threshold = 0.05;
};

EvalSummary aggregate(const std::vector<CaseError>& cases, int n_o, double threshold = 0.05);

/// Predict every window (eval mode, original units) and score each output
/// with the error measure. Prediction at the last past step is the observed
/// value, so that step contributes zero error.
std::vector<CaseError> evaluate_model(const IstftModel& model, const std::vector<Window>& windows);

/// Error report CSV: group_id,output_id,mode,epsilon (one row per scored
/// window and output).
void write_error_report_csv(const std::vector<CaseError>& cases, const std::string& path);

/// Attention matrix CSV: labeled square matrix, labels t<i>_o<k>. crop_steps
/// > 0 keeps only the leading crop_steps time blocks.
void export_attention_csv(const IstftModel& model, const Window& w, const std::string& path,
                          int crop_steps = 0);

/// Selection weights averaged over sequence positions and windows. Past
/// weights are resolved per output id; each group sums to 1.
struct ImportanceRecord {
    std::vector<double> parameter_weights;           // p
    std::vector<std::vector<double>> past_weights;   // n_o x (n_I + 1), observed last
    std::vector<double> future_weights;              // n_I, or {1} for the placeholder
};

ImportanceRecord compute_importance(const IstftModel& model, const std::vector<Window>& windows);

/// Importance CSV: group,variable,weight with groups `parameters`,
/// `past_o<k>` and `future`.
void export_importance_csv(const IstftModel& model, const std::vector<Window>& windows,
                           const std::string& path);

} // namespace istft

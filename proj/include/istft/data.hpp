#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "istft/common.hpp"

namespace istft {

/// One trajectory group: a fixed parameter sample with its time series.
struct RawGroup {
    int64_t group_id = 0;
    std::vector<double> mu;    // p
    std::vector<double> times; // n_T, strictly increasing
    std::vector<double> u;     // n_T x n_I row-major
    std::vector<double> y;     // n_T x n_o row-major
};

/// Wide layout: one row per time instance, one column per output.
struct RawDataset {
    int n_I = 0, p = 0, n_o = 1, n_T = 0;
    std::vector<RawGroup> groups;
    void validate() const;
};

/// Long layout: one row per (group, time, output). Rows are ordered
/// group-major, then time, then output id; the columns left of the output id
/// repeat across each bundle of n_o rows.
struct ReshapedDataset {
    int n_I = 0, p = 0, n_o = 1, n_T = 0;
    std::vector<int64_t> row_id;
    std::vector<int64_t> group_id;
    std::vector<double> time;
    std::vector<double> u;  // rows x n_I
    std::vector<double> mu; // rows x p
    std::vector<int> output_id; // 1..n_o
    std::vector<double> y;

    size_t row_count() const { return row_id.size(); }
    std::vector<int64_t> group_ids_in_order() const;
    void validate() const;
};

ReshapedDataset reshape(const RawDataset& raw);
RawDataset unreshape(const ReshapedDataset& d);

/// Partition sizes by group count, or explicit group-id lists.
struct SplitSpec {
    int n_train = 0, n_validate = 0, n_test = 0;
    std::optional<std::vector<std::vector<int64_t>>> explicit_ids; // {train, validate, test}
};

struct SplitResult {
    ReshapedDataset train, validate, test;
};

/// Group-disjoint partition by parameter id; the seeded shuffle makes the
/// assignment reproducible.
SplitResult split(const ReshapedDataset& d, const SplitSpec& spec, uint64_t seed);

struct WindowSpec {
    int n_k = 1;    // past steps
    int n_tau = 1;  // forecast steps
    int n_omega = 1; // windows per group
    std::vector<int> explicit_starts; // optional 1-based start indices
    int n_t() const { return n_k + n_tau; }
};

/// One training/testing window: n_t consecutive time instances of one group.
/// The first n_k instances are past (outputs observed), the rest future
/// (outputs are targets).
struct Window {
    int64_t group_id = 0;
    int window_index = 0;
    int start = 1; // 1-based time index within the group
    int n_k = 1, n_tau = 1, n_I = 0, n_o = 1, p = 0;
    std::vector<double> times; // n_t
    std::vector<double> u;     // n_t x n_I
    std::vector<double> mu;    // p
    std::vector<double> y;     // n_t x n_o

    int n_t() const { return n_k + n_tau; }
    int row_count() const { return n_t() * n_o; }
};

/// Evenly spaced window starts covering [t_1, t_{n_T - n_t + 1}].
std::vector<int> window_starts(int n_T, int n_t, int n_omega);
std::vector<Window> window(const ReshapedDataset& d, const WindowSpec& spec);

// CSV schema: row_id,group_id,time,u_1..u_nI,mu_1..mu_p,output_id,y
// (u/mu columns absent when n_I/p is 0). 17-significant-digit decimals,
// LF line endings.
void write_csv(const ReshapedDataset& d, const std::string& path);
ReshapedDataset read_csv(const std::string& path);

// Wide-layout CSV: row_id,group_id,time,u_1..u_nI,mu_1..mu_p,y_1..y_no
void write_raw_csv(const RawDataset& d, const std::string& path);
RawDataset read_raw_csv(const std::string& path);

/// Per-column z-score statistics, computed on the training partition only.
/// Zero-variance columns record std 1 so they pass through unchanged.
struct NormStats {
    std::vector<double> u_mean, u_std;   // n_I
    std::vector<double> mu_mean, mu_std; // p
    std::vector<double> y_mean, y_std;   // n_o (per output id)
};

NormStats compute_stats(const ReshapedDataset& train);
ReshapedDataset normalize(const ReshapedDataset& d, const NormStats& s);
ReshapedDataset denormalize(const ReshapedDataset& d, const NormStats& s);
Window normalize_window(const Window& w, const NormStats& s);

} // namespace istft

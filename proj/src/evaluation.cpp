#include "istft/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "istft/kernels.hpp"

namespace istft {

ErrorMeasure error_measure(const std::vector<double>& pred, const std::vector<double>& ref,
                           int n_k, int n_t) {
    if (static_cast<int>(pred.size()) != n_t || static_cast<int>(ref.size()) != n_t)
        throw std::invalid_argument("error_measure: series must span the full window (n_t=" +
                                    std::to_string(n_t) + " values)");
    if (n_k < 1 || n_k > n_t)
        throw std::invalid_argument("error_measure: n_k out of range");
    double mag = 0.0;
    for (int i = n_k; i <= n_t; ++i) mag += std::fabs(ref[i - 1]);
    mag /= n_t;

    ErrorMeasure out;
    double acc = 0.0;
    if (mag <= 1.0) {
        out.mode = ErrorMode::absolute;
        for (int i = n_k; i <= n_t; ++i) acc += std::fabs(pred[i - 1] - ref[i - 1]);
    } else {
        out.mode = ErrorMode::relative;
        for (int i = n_k; i <= n_t; ++i)
            acc += std::fabs(pred[i - 1] - ref[i - 1]) / std::max(std::fabs(ref[i - 1]), 1e-12);
    }
    out.epsilon = acc / n_t;
    return out;
}

EvalSummary aggregate(const std::vector<CaseError>& cases, int n_o, double threshold) {
    if (cases.empty()) throw std::invalid_argument("aggregate: no cases");
    EvalSummary s;
    s.threshold = threshold;
    s.mean_eps.assign(n_o, 0.0);
    s.fraction_below.assign(n_o, 0.0);
    std::vector<int> counts(n_o, 0);
    for (const auto& c : cases) {
        const int k = c.output_id - 1;
        s.mean_eps[k] += c.m.epsilon;
        if (c.m.epsilon < threshold) s.fraction_below[k] += 1.0;
        ++counts[k];
    }
    for (int k = 0; k < n_o; ++k) {
        if (counts[k] == 0) continue;
        s.mean_eps[k] /= counts[k];
        s.fraction_below[k] /= counts[k];
    }
    s.n_cases = counts.empty() ? 0 : counts[0];
    return s;
}

std::vector<CaseError> evaluate_model(const IstftModel& model, const std::vector<Window>& windows) {
    const int n_o = model.config().n_o;
    const int n_k = model.config().n_k;
    const int n_t = model.config().n_t();
    std::vector<std::vector<CaseError>> per_window(windows.size());
    kernels::parallel_for(static_cast<int>(windows.size()), [&](int wi) {
        const Window& w = windows[wi];
        const auto batch = predict(model, w);
        for (int k = 0; k < n_o; ++k) {
            std::vector<double> pred(n_t), ref(n_t);
            for (int t = 0; t < n_t; ++t) ref[t] = w.y[static_cast<size_t>(t) * n_o + k];
            // past steps carry the observed values; forecasts fill the rest
            for (int t = 0; t < n_k; ++t) pred[t] = ref[t];
            for (int t = n_k; t < n_t; ++t)
                pred[t] = batch.yhat[static_cast<size_t>(t - n_k) * n_o + k];
            CaseError ce;
            ce.group_id = w.group_id;
            ce.window_index = w.window_index;
            ce.output_id = k + 1;
            ce.m = error_measure(pred, ref, n_k, n_t);
            per_window[wi].push_back(ce);
        }
    });
    std::vector<CaseError> out;
    out.reserve(windows.size() * n_o);
    for (auto& v : per_window)
        for (auto& c : v) out.push_back(c);
    return out;
}

void write_error_report_csv(const std::vector<CaseError>& cases, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << "group_id,output_id,mode,epsilon\n";
    char buf[96];
    for (const auto& c : cases) {
        std::snprintf(buf, sizeof(buf), "%lld,%d,%s,%.17g\n",
                      static_cast<long long>(c.group_id), c.output_id,
                      c.m.mode == ErrorMode::absolute ? "absolute" : "relative", c.m.epsilon);
        f << buf;
    }
    if (!f) throw DataError("write to '" + path + "' failed");
}

void export_attention_csv(const IstftModel& model, const Window& w, const std::string& path,
                          int crop_steps) {
    const auto batch = predict(model, w);
    const auto& att = *batch.raw.attention;
    const int n_o = model.config().n_o;
    const int n_t = model.config().n_t();
    const int keep_steps = crop_steps > 0 ? std::min(crop_steps, n_t) : n_t;
    const int keep = keep_steps * n_o;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    auto label = [&](int s) {
        return "t" + std::to_string(s / n_o + 1) + "_o" + std::to_string(s % n_o + 1);
    };
    f << "label";
    for (int c = 0; c < keep; ++c) f << ',' << label(c);
    f << '\n';
    char buf[40];
    for (int r = 0; r < keep; ++r) {
        f << label(r);
        for (int c = 0; c < keep; ++c) {
            std::snprintf(buf, sizeof(buf), ",%.17g", att.at(r, c));
            f << buf;
        }
        f << '\n';
    }
    if (!f) throw DataError("write to '" + path + "' failed");
}

ImportanceRecord compute_importance(const IstftModel& model, const std::vector<Window>& windows) {
    if (windows.empty()) throw std::invalid_argument("importance: no windows given");
    const auto& cfg = model.config();
    const int v_past = model.past_var_count();
    const int v_future = model.future_var_count();

    ImportanceRecord rec;
    rec.parameter_weights.assign(cfg.p, 0.0);
    rec.past_weights.assign(cfg.n_o, std::vector<double>(v_past, 0.0));
    rec.future_weights.assign(v_future, 0.0);

    std::vector<PredictionBatch> batches(windows.size());
    kernels::parallel_for(static_cast<int>(windows.size()), [&](int wi) {
        batches[wi] = predict(model, windows[wi]);
    });

    for (const auto& batch : batches) {
        if (cfg.p > 0)
            for (int j = 0; j < cfg.p; ++j)
                rec.parameter_weights[j] += batch.raw.static_selection->data[j];
        const auto& past = *batch.raw.past_selection;
        // average positions per output id within this window
        for (int k = 0; k < cfg.n_o; ++k) {
            int rows = 0;
            for (int s = k; s < past.rows; s += cfg.n_o) ++rows;
            for (int v = 0; v < v_past; ++v) {
                double acc = 0.0;
                for (int s = k; s < past.rows; s += cfg.n_o) acc += past.at(s, v);
                rec.past_weights[k][v] += acc / rows;
            }
        }
        const auto& future = *batch.raw.future_selection;
        for (int v = 0; v < v_future; ++v) {
            double acc = 0.0;
            for (int s = 0; s < future.rows; ++s) acc += future.at(s, v);
            rec.future_weights[v] += acc / future.rows;
        }
    }

    const double inv = 1.0 / static_cast<double>(windows.size());
    for (auto& v : rec.parameter_weights) v *= inv;
    for (auto& row : rec.past_weights)
        for (auto& v : row) v *= inv;
    for (auto& v : rec.future_weights) v *= inv;
    return rec;
}

void export_importance_csv(const IstftModel& model, const std::vector<Window>& windows,
                           const std::string& path) {
    const auto rec = compute_importance(model, windows);
    const auto& cfg = model.config();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << "group,variable,weight\n";
    char buf[96];
    for (int j = 0; j < cfg.p; ++j) {
        std::snprintf(buf, sizeof(buf), "parameters,mu_%d,%.17g\n", j + 1,
                      rec.parameter_weights[j]);
        f << buf;
    }
    for (int k = 0; k < cfg.n_o; ++k) {
        for (int i = 0; i < cfg.n_I; ++i) {
            std::snprintf(buf, sizeof(buf), "past_o%d,u_%d,%.17g\n", k + 1, i + 1,
                          rec.past_weights[k][i]);
            f << buf;
        }
        std::snprintf(buf, sizeof(buf), "past_o%d,observed,%.17g\n", k + 1,
                      rec.past_weights[k][cfg.n_I]);
        f << buf;
    }
    for (size_t v = 0; v < rec.future_weights.size(); ++v) {
        const std::string name = cfg.n_I > 0 ? "u_" + std::to_string(v + 1) : "placeholder";
        std::snprintf(buf, sizeof(buf), "future,%s,%.17g\n", name.c_str(), rec.future_weights[v]);
        f << buf;
    }
    if (!f) throw DataError("write to '" + path + "' failed");
}

} // namespace istft

// istft: generate benchmark data, train the multi-output temporal fusion
// forecaster, predict, evaluate, and export interpretability artifacts.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "istft/dynamics.hpp"
#include "istft/evaluation.hpp"
#include "istft/gradcheck.hpp"
#include "istft/kernels.hpp"
#include "istft/model.hpp"
#include "istft/training.hpp"

namespace {

using namespace istft;

// Flat key=value config file with [model]/[train]/[data]/[system] and
// per-generator sections. '#' starts a comment. Flags override file values.
struct ConfigFile {
    std::map<std::string, std::string> values; // "section.key" -> value

    static ConfigFile parse(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file '" + path + "'");
        ConfigFile cfg;
        std::string line, section;
        size_t line_no = 0;
        while (std::getline(f, line)) {
            ++line_no;
            if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
            while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
                line.pop_back();
            size_t start = line.find_first_not_of(" \t");
            if (start == std::string::npos) continue;
            line.erase(0, start);
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(path + " line " + std::to_string(line_no) +
                                      ": malformed section header");
                section = line.substr(1, line.size() - 2);
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + " line " + std::to_string(line_no) +
                                  ": expected key=value");
            std::string key = line.substr(0, eq);
            std::string value = line.substr(eq + 1);
            while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
            size_t vs = value.find_first_not_of(" \t");
            value.erase(0, vs == std::string::npos ? value.size() : vs);
            if (key.empty())
                throw ConfigError(path + " line " + std::to_string(line_no) + ": empty key");
            cfg.values[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    template <class T>
    void get(const std::string& key, T& target) const {
        auto it = values.find(key);
        if (it == values.end()) return;
        const std::string& s = it->second;
        try {
            if constexpr (std::is_same_v<T, std::string>) {
                target = s;
            } else if constexpr (std::is_same_v<T, double>) {
                target = std::stod(s);
            } else if constexpr (std::is_same_v<T, uint64_t>) {
                target = std::stoull(s);
            } else {
                target = static_cast<T>(std::stoll(s));
            }
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': cannot parse value '" + s + "'");
        }
    }
};

// Applies file values only where the flag was not given on the command line.
struct OptionLayer {
    CLI::App* cmd = nullptr;
    ConfigFile cfg;

    template <class T>
    void fill(const std::string& flag, const std::string& key, T& target) const {
        if (cmd->count(flag) == 0) cfg.get(key, target);
    }
};

struct CommonArgs {
    std::string config_path;
    uint64_t seed = 0;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_out) {
    cmd->add_option("--config", a.config_path, "key=value config file");
    cmd->add_option("--seed", a.seed, "master seed");
    auto* out = cmd->add_option("--out", a.out, "output path");
    if (needs_out) out->required();
}

OptionLayer layer_for(CLI::App* cmd, const CommonArgs& a) {
    OptionLayer layer;
    layer.cmd = cmd;
    if (!a.config_path.empty()) layer.cfg = ConfigFile::parse(a.config_path);
    int threads = 0;
    layer.cfg.get("system.threads", threads);
    if (threads > 0) kernels::set_max_threads(threads);
    return layer;
}

// ------------------------------------------------------------ subcommands

struct GenerateArgs {
    CommonArgs common;
    std::string system;
    int n_p = 4;
    int n_T = 0; // 0 = per-system default
    double dt = 0.01;
    int n_x = 512;
    int substeps = 10;
    double eps_lo = 0.01, eps_hi = 0.04, c_lo = 0.025, c_hi = 0.075;
};

int cmd_generate(const GenerateArgs& args, const OptionLayer& layer) {
    GenerateArgs a = args;
    layer.fill("--n-p", a.system + ".n_p", a.n_p);
    layer.fill("--n-T", a.system + ".n_T", a.n_T);
    layer.fill("--dt", a.system + ".dt", a.dt);
    layer.fill("--n-x", a.system + ".n_x", a.n_x);
    layer.fill("--substeps", a.system + ".substeps", a.substeps);
    layer.fill("--eps-lo", "fhn.eps_lo", a.eps_lo);
    layer.fill("--eps-hi", "fhn.eps_hi", a.eps_hi);
    layer.fill("--c-lo", "fhn.c_lo", a.c_lo);
    layer.fill("--c-hi", "fhn.c_hi", a.c_hi);

    RawDataset raw;
    if (a.system == "lorenz63") {
        Lorenz63Config cfg;
        cfg.n_p = a.n_p;
        cfg.n_T = a.n_T > 0 ? a.n_T : 256;
        cfg.dt = a.dt;
        cfg.seed = a.common.seed;
        raw = lorenz_generate(cfg);
    } else if (a.system == "fhn") {
        FhnConfig cfg;
        cfg.n_p = a.n_p;
        cfg.n_T = a.n_T > 0 ? a.n_T : 500;
        cfg.n_x = a.n_x;
        cfg.substeps = a.substeps;
        cfg.eps_lo = a.eps_lo;
        cfg.eps_hi = a.eps_hi;
        cfg.c_lo = a.c_lo;
        cfg.c_hi = a.c_hi;
        cfg.seed = a.common.seed;
        raw = fhn_generate(cfg);
    } else {
        throw ConfigError("generate: unknown system '" + a.system +
                          "' (expected lorenz63 or fhn)");
    }
    write_csv(reshape(raw), a.common.out);
    std::printf("wrote %s: %d groups x %d steps x %d outputs\n", a.common.out.c_str(),
                static_cast<int>(raw.groups.size()), raw.n_T, raw.n_o);
    return 0;
}

struct TrainArgs {
    CommonArgs common;
    std::string data_path, log_path;
    int d_model = 32, heads = 4;
    double dropout = 0.1;
    int n_k = 1, n_tau = 1, n_omega = 1;
    int n_train = 0, n_val = 0, n_test = 0;
    std::string loss = "mae";
    double lr = 0.001;
    int batch = 256, epochs = 100;
    int patience = 0; // 0 = disabled
    double clip = 1.0;
};

void fill_train_args(TrainArgs& a, const OptionLayer& layer) {
    layer.fill("--d-model", "model.d_model", a.d_model);
    layer.fill("--heads", "model.heads", a.heads);
    layer.fill("--dropout", "model.dropout", a.dropout);
    layer.fill("--n-k", "model.n_k", a.n_k);
    layer.fill("--n-tau", "model.n_tau", a.n_tau);
    layer.fill("--n-omega", "data.n_omega", a.n_omega);
    layer.fill("--n-train", "data.n_train", a.n_train);
    layer.fill("--n-val", "data.n_val", a.n_val);
    layer.fill("--n-test", "data.n_test", a.n_test);
    layer.fill("--loss", "train.loss", a.loss);
    layer.fill("--lr", "train.lr", a.lr);
    layer.fill("--batch", "train.batch", a.batch);
    layer.fill("--epochs", "train.epochs", a.epochs);
    layer.fill("--patience", "train.patience", a.patience);
    layer.fill("--clip", "train.clip", a.clip);
    layer.fill("--seed", "train.seed", a.common.seed);
}

int cmd_train(TrainArgs& a, const OptionLayer& layer) {
    fill_train_args(a, layer);
    auto data = read_csv(a.data_path);

    SplitSpec split_spec;
    const int n_groups = static_cast<int>(data.group_ids_in_order().size());
    split_spec.n_train = a.n_train > 0 ? a.n_train : n_groups;
    split_spec.n_validate = a.n_val;
    split_spec.n_test = a.n_test;
    auto parts = split(data, split_spec, a.common.seed);

    const auto stats = compute_stats(parts.train);
    WindowSpec wspec;
    wspec.n_k = a.n_k;
    wspec.n_tau = a.n_tau;
    wspec.n_omega = a.n_omega;
    auto train_w = window(normalize(parts.train, stats), wspec);
    std::vector<Window> val_w;
    if (a.n_val > 0) val_w = window(normalize(parts.validate, stats), wspec);

    ModelConfig mc;
    mc.d_model = a.d_model;
    mc.n_heads = a.heads;
    mc.dropout_rate = a.dropout;
    mc.n_o = data.n_o;
    mc.n_I = data.n_I;
    mc.p = data.p;
    mc.n_k = a.n_k;
    mc.n_tau = a.n_tau;
    IstftModel model(mc, a.common.seed);
    model.set_normalization(stats);

    TrainConfig tc;
    tc.loss = parse_loss_kind(a.loss);
    tc.lr = a.lr;
    tc.batch = a.batch;
    tc.epochs = a.epochs;
    if (a.patience > 0) tc.patience = a.patience;
    tc.max_grad_norm = a.clip;
    tc.seed = a.common.seed;

    std::ofstream log_file;
    std::ostream* log_stream = nullptr;
    if (!a.log_path.empty()) {
        log_file.open(a.log_path, std::ios::binary);
        if (!log_file) throw DataError("cannot open '" + a.log_path + "' for writing");
        log_stream = &log_file;
    }
    auto result = train(model, train_w, val_w, tc, log_stream);
    model.save(a.common.out);
    std::printf("trained %zu epochs, best epoch %d (val %s %.6g); model -> %s\n",
                result.log.size(), result.best_epoch, loss_kind_name(tc.loss).c_str(),
                result.best_val_loss, a.common.out.c_str());
    return 0;
}

std::vector<Window> load_windows(const IstftModel& model, const std::string& data_path,
                                 int n_omega) {
    auto data = read_csv(data_path);
    const auto& mc = model.config();
    if (data.n_o != mc.n_o || data.n_I != mc.n_I || data.p != mc.p)
        throw DataError("data file layout (n_o=" + std::to_string(data.n_o) + ", n_I=" +
                        std::to_string(data.n_I) + ", p=" + std::to_string(data.p) +
                        ") does not match the model");
    WindowSpec wspec;
    wspec.n_k = mc.n_k;
    wspec.n_tau = mc.n_tau;
    wspec.n_omega = n_omega;
    return window(data, wspec);
}

struct PredictArgs {
    CommonArgs common;
    std::string model_path, data_path;
    int n_omega = 1;
};

int cmd_predict(PredictArgs& a, const OptionLayer& layer) {
    layer.fill("--n-omega", "data.n_omega", a.n_omega);
    auto model = IstftModel::load(a.model_path);
    auto windows = load_windows(model, a.data_path, a.n_omega);

    std::vector<PredictionBatch> batches(windows.size());
    kernels::parallel_for(static_cast<int>(windows.size()),
                          [&](int i) { batches[i] = predict(model, windows[i]); });

    std::ofstream f(a.common.out, std::ios::binary);
    if (!f) throw DataError("cannot open '" + a.common.out + "' for writing");
    f << "group_id,window,time,output_id,y_pred\n";
    const auto& mc = model.config();
    char buf[128];
    for (size_t wi = 0; wi < windows.size(); ++wi) {
        const auto& w = windows[wi];
        for (int s = 0; s < mc.n_tau * mc.n_o; ++s) {
            const int ti = mc.n_k + s / mc.n_o;
            std::snprintf(buf, sizeof(buf), "%lld,%d,%.17g,%d,%.17g\n",
                          static_cast<long long>(w.group_id), w.window_index, w.times[ti],
                          s % mc.n_o + 1, batches[wi].yhat[s]);
            f << buf;
        }
    }
    if (!f) throw DataError("write to '" + a.common.out + "' failed");
    std::printf("wrote %s: %zu windows x %d forecasts\n", a.common.out.c_str(), windows.size(),
                mc.n_tau * mc.n_o);
    return 0;
}

struct EvaluateArgs {
    CommonArgs common;
    std::string model_path, data_path;
    int n_omega = 1;
};

int cmd_evaluate(EvaluateArgs& a, const OptionLayer& layer) {
    layer.fill("--n-omega", "data.n_omega", a.n_omega);
    auto model = IstftModel::load(a.model_path);
    auto windows = load_windows(model, a.data_path, a.n_omega);
    auto cases = evaluate_model(model, windows);
    if (!a.common.out.empty()) write_error_report_csv(cases, a.common.out);
    auto summary = aggregate(cases, model.config().n_o);
    for (int k = 0; k < model.config().n_o; ++k)
        std::printf("output %d: mean eps %.6g, fraction below %.2f: %.4f\n", k + 1,
                    summary.mean_eps[k], summary.threshold, summary.fraction_below[k]);
    return 0;
}

struct ExportArgs {
    CommonArgs common;
    std::string model_path, data_path;
    int n_omega = 1;
    int64_t group = 0; // 0 = first
    int window_index = 0;
    int crop_steps = 0;
};

int cmd_export_attention(ExportArgs& a, const OptionLayer& layer) {
    layer.fill("--n-omega", "data.n_omega", a.n_omega);
    auto model = IstftModel::load(a.model_path);
    auto windows = load_windows(model, a.data_path, a.n_omega);
    const Window* chosen = nullptr;
    for (const auto& w : windows) {
        if ((a.group == 0 || w.group_id == a.group) && w.window_index == a.window_index) {
            chosen = &w;
            break;
        }
    }
    if (!chosen)
        throw DataError("export-attention: no window for group " + std::to_string(a.group) +
                        ", window " + std::to_string(a.window_index));
    export_attention_csv(model, *chosen, a.common.out, a.crop_steps);
    std::printf("wrote %s\n", a.common.out.c_str());
    return 0;
}

int cmd_export_importance(ExportArgs& a, const OptionLayer& layer) {
    layer.fill("--n-omega", "data.n_omega", a.n_omega);
    auto model = IstftModel::load(a.model_path);
    auto windows = load_windows(model, a.data_path, a.n_omega);
    export_importance_csv(model, windows, a.common.out);
    std::printf("wrote %s\n", a.common.out.c_str());
    return 0;
}

int cmd_gradcheck(uint64_t seed) {
    constexpr double op_tol = 1e-5, model_tol = 1e-4;
    bool ok = true;
    for (const auto& check : gradcheck::check_all_ops(seed)) {
        const bool pass = check.max_rel_err < op_tol;
        ok = ok && pass;
        std::printf("%-16s max rel err %.3e  %s\n", check.name.c_str(), check.max_rel_err,
                    pass ? "ok" : "FAIL");
    }
    const double model_err = gradcheck::check_model(seed, 10);
    const bool model_pass = model_err < model_tol;
    ok = ok && model_pass;
    std::printf("%-16s max rel err %.3e  %s\n", "full_model", model_err,
                model_pass ? "ok" : "FAIL");
    return ok ? 0 : 5;
}

int cmd_reshape(const std::string& in_path, const std::string& out_path) {
    write_csv(reshape(read_raw_csv(in_path)), out_path);
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"Spatial-temporal fusion forecaster for parametric dynamical systems"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* sub_gen = app.add_subcommand("generate", "generate benchmark trajectories as CSV");
    sub_gen->add_option("system", gen.system, "lorenz63 or fhn")->required();
    add_common(sub_gen, gen.common, true);
    sub_gen->add_option("--n-p", gen.n_p, "number of groups");
    sub_gen->add_option("--n-T", gen.n_T, "time steps per group");
    sub_gen->add_option("--dt", gen.dt, "integrator step (lorenz63)");
    sub_gen->add_option("--n-x", gen.n_x, "grid points (fhn)");
    sub_gen->add_option("--substeps", gen.substeps, "internal substeps per saved step (fhn)");
    sub_gen->add_option("--eps-lo", gen.eps_lo, "eps lower bound (fhn)");
    sub_gen->add_option("--eps-hi", gen.eps_hi, "eps upper bound (fhn)");
    sub_gen->add_option("--c-lo", gen.c_lo, "c lower bound (fhn)");
    sub_gen->add_option("--c-hi", gen.c_hi, "c upper bound (fhn)");

    std::string reshape_in, reshape_out;
    auto* sub_reshape = app.add_subcommand("reshape", "convert wide-layout CSV to the long layout");
    sub_reshape->add_option("--in", reshape_in, "wide-layout CSV")->required();
    sub_reshape->add_option("--out", reshape_out, "long-layout CSV")->required();

    TrainArgs tr;
    auto* sub_train = app.add_subcommand("train", "train a model on a long-layout CSV");
    add_common(sub_train, tr.common, true);
    sub_train->add_option("--data", tr.data_path, "training CSV")->required();
    sub_train->add_option("--log", tr.log_path, "loss log CSV");
    sub_train->add_option("--d-model", tr.d_model, "model width");
    sub_train->add_option("--heads", tr.heads, "attention heads");
    sub_train->add_option("--dropout", tr.dropout, "dropout rate");
    sub_train->add_option("--n-k", tr.n_k, "past steps");
    sub_train->add_option("--n-tau", tr.n_tau, "forecast steps");
    sub_train->add_option("--n-omega", tr.n_omega, "windows per group");
    sub_train->add_option("--n-train", tr.n_train, "training groups");
    sub_train->add_option("--n-val", tr.n_val, "validation groups");
    sub_train->add_option("--n-test", tr.n_test, "test groups (held out)");
    sub_train->add_option("--loss", tr.loss, "mae or mse");
    sub_train->add_option("--lr", tr.lr, "learning rate");
    sub_train->add_option("--batch", tr.batch, "minibatch size");
    sub_train->add_option("--epochs", tr.epochs, "max epochs");
    sub_train->add_option("--patience", tr.patience, "early-stopping patience (0 = off)");
    sub_train->add_option("--clip", tr.clip, "max gradient norm");

    PredictArgs pr;
    auto* sub_predict = app.add_subcommand("predict", "forecast with a trained model");
    add_common(sub_predict, pr.common, true);
    sub_predict->add_option("--model", pr.model_path, "model file")->required();
    sub_predict->add_option("--data", pr.data_path, "long-layout CSV")->required();
    sub_predict->add_option("--n-omega", pr.n_omega, "windows per group");

    EvaluateArgs ev;
    auto* sub_eval = app.add_subcommand("evaluate", "score forecasts with the error measure");
    add_common(sub_eval, ev.common, false);
    sub_eval->add_option("--model", ev.model_path, "model file")->required();
    sub_eval->add_option("--data", ev.data_path, "long-layout CSV")->required();
    sub_eval->add_option("--n-omega", ev.n_omega, "windows per group");

    ExportArgs ex_att;
    auto* sub_att = app.add_subcommand("export-attention", "write one window's attention matrix");
    add_common(sub_att, ex_att.common, true);
    sub_att->add_option("--model", ex_att.model_path, "model file")->required();
    sub_att->add_option("--data", ex_att.data_path, "long-layout CSV")->required();
    sub_att->add_option("--n-omega", ex_att.n_omega, "windows per group");
    sub_att->add_option("--group", ex_att.group, "group id (default: first)");
    sub_att->add_option("--window", ex_att.window_index, "window index within the group");
    sub_att->add_option("--crop-steps", ex_att.crop_steps, "keep only the first N time blocks");

    ExportArgs ex_imp;
    auto* sub_imp = app.add_subcommand("export-importance", "write variable-importance weights");
    add_common(sub_imp, ex_imp.common, true);
    sub_imp->add_option("--model", ex_imp.model_path, "model file")->required();
    sub_imp->add_option("--data", ex_imp.data_path, "long-layout CSV")->required();
    sub_imp->add_option("--n-omega", ex_imp.n_omega, "windows per group");

    CommonArgs gc;
    auto* sub_gc = app.add_subcommand("gradcheck", "finite-difference check of every op and the full model");
    add_common(sub_gc, gc, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (sub_gen->parsed()) return cmd_generate(gen, layer_for(sub_gen, gen.common));
    if (sub_reshape->parsed()) return cmd_reshape(reshape_in, reshape_out);
    if (sub_train->parsed()) return cmd_train(tr, layer_for(sub_train, tr.common));
    if (sub_predict->parsed()) return cmd_predict(pr, layer_for(sub_predict, pr.common));
    if (sub_eval->parsed()) return cmd_evaluate(ev, layer_for(sub_eval, ev.common));
    if (sub_att->parsed()) return cmd_export_attention(ex_att, layer_for(sub_att, ex_att.common));
    if (sub_imp->parsed()) return cmd_export_importance(ex_imp, layer_for(sub_imp, ex_imp.common));
    if (sub_gc->parsed()) {
        layer_for(sub_gc, gc);
        return cmd_gradcheck(gc.seed);
    }
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const istft::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const istft::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const istft::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

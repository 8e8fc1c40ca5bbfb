#include "istft/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace istft {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void RawDataset::validate() const {
    for (const auto& g : groups) {
        const std::string where = "group " + std::to_string(g.group_id);
        if (static_cast<int>(g.times.size()) != n_T)
            throw DataError(where + ": has " + std::to_string(g.times.size()) +
                            " time stamps, dataset n_T is " + std::to_string(n_T));
        if (static_cast<int>(g.mu.size()) != p)
            throw DataError(where + ": parameter vector length " + std::to_string(g.mu.size()) +
                            ", expected " + std::to_string(p));
        if (g.u.size() != static_cast<size_t>(n_T) * n_I)
            throw DataError(where + ": ragged input matrix");
        if (g.y.size() != static_cast<size_t>(n_T) * n_o)
            throw DataError(where + ": ragged output matrix");
        for (int t = 1; t < n_T; ++t)
            if (!(g.times[t] > g.times[t - 1]))
                throw DataError(where + ": time stamps not strictly increasing at index " +
                                std::to_string(t));
    }
}

std::vector<int64_t> ReshapedDataset::group_ids_in_order() const {
    std::vector<int64_t> ids;
    std::unordered_set<int64_t> seen;
    for (int64_t gid : group_id)
        if (seen.insert(gid).second) ids.push_back(gid);
    return ids;
}

void ReshapedDataset::validate() const {
    const size_t n = row_count();
    if (group_id.size() != n || time.size() != n || output_id.size() != n || y.size() != n ||
        u.size() != n * n_I || mu.size() != n * p)
        throw DataError("reshaped dataset: column lengths disagree");
    if (n % (static_cast<size_t>(n_o)) != 0)
        throw DataError("reshaped dataset: row count " + std::to_string(n) +
                        " is not a multiple of n_o=" + std::to_string(n_o));
    // output_id must cycle 1..n_o with identical left-hand columns per bundle
    for (size_t r = 0; r < n; ++r) {
        const int expect = static_cast<int>(r % n_o) + 1;
        if (output_id[r] != expect)
            throw DataError("reshaped dataset: output_id at row " + std::to_string(r + 1) +
                            " is " + std::to_string(output_id[r]) + ", expected " +
                            std::to_string(expect));
        if (r % n_o != 0) {
            const size_t head = r - (r % n_o);
            if (group_id[r] != group_id[head] || time[r] != time[head])
                throw DataError("reshaped dataset: bundle at row " + std::to_string(head + 1) +
                                " mixes groups or time stamps");
        }
    }
    // per group: strictly increasing time per bundle, shared n_T
    size_t r = 0;
    std::unordered_set<int64_t> seen;
    while (r < n) {
        const int64_t gid = group_id[r];
        if (!seen.insert(gid).second)
            throw DataError("reshaped dataset: group " + std::to_string(gid) +
                            " appears in two separate blocks");
        size_t len = 0;
        double prev_t = 0;
        while (r < n && group_id[r] == gid) {
            if (output_id[r] == 1) {
                if (len > 0 && !(time[r] > prev_t))
                    throw DataError("group " + std::to_string(gid) +
                                    ": time stamps not strictly increasing");
                prev_t = time[r];
                ++len;
            }
            ++r;
        }
        if (static_cast<int>(len) != n_T)
            throw DataError("group " + std::to_string(gid) + ": has " + std::to_string(len) +
                            " time instances, dataset n_T is " + std::to_string(n_T));
    }
}

ReshapedDataset reshape(const RawDataset& raw) {
    raw.validate();
    ReshapedDataset d;
    d.n_I = raw.n_I;
    d.p = raw.p;
    d.n_o = raw.n_o;
    d.n_T = raw.n_T;
    const size_t rows = raw.groups.size() * static_cast<size_t>(raw.n_T) * raw.n_o;
    d.row_id.reserve(rows);
    d.group_id.reserve(rows);
    d.time.reserve(rows);
    d.u.reserve(rows * raw.n_I);
    d.mu.reserve(rows * raw.p);
    d.output_id.reserve(rows);
    d.y.reserve(rows);
    int64_t rid = 1;
    for (const auto& g : raw.groups) {
        for (int t = 0; t < raw.n_T; ++t) {
            for (int k = 0; k < raw.n_o; ++k) {
                d.row_id.push_back(rid++);
                d.group_id.push_back(g.group_id);
                d.time.push_back(g.times[t]);
                for (int i = 0; i < raw.n_I; ++i)
                    d.u.push_back(g.u[static_cast<size_t>(t) * raw.n_I + i]);
                for (int j = 0; j < raw.p; ++j) d.mu.push_back(g.mu[j]);
                d.output_id.push_back(k + 1);
                d.y.push_back(g.y[static_cast<size_t>(t) * raw.n_o + k]);
            }
        }
    }
    return d;
}

RawDataset unreshape(const ReshapedDataset& d) {
    d.validate();
    RawDataset raw;
    raw.n_I = d.n_I;
    raw.p = d.p;
    raw.n_o = d.n_o;
    raw.n_T = d.n_T;
    size_t r = 0;
    const size_t n = d.row_count();
    while (r < n) {
        RawGroup g;
        g.group_id = d.group_id[r];
        g.mu.assign(d.mu.begin() + r * d.p, d.mu.begin() + (r + 1) * d.p);
        while (r < n && d.group_id[r] == g.group_id) {
            if (d.output_id[r] == 1) {
                g.times.push_back(d.time[r]);
                for (int i = 0; i < d.n_I; ++i) g.u.push_back(d.u[r * d.n_I + i]);
            }
            g.y.push_back(d.y[r]);
            ++r;
        }
        raw.groups.push_back(std::move(g));
    }
    return raw;
}

namespace {

ReshapedDataset take_groups(const ReshapedDataset& d, const std::vector<int64_t>& ids) {
    std::unordered_set<int64_t> want(ids.begin(), ids.end());
    ReshapedDataset out;
    out.n_I = d.n_I;
    out.p = d.p;
    out.n_o = d.n_o;
    out.n_T = d.n_T;
    for (size_t r = 0; r < d.row_count(); ++r) {
        if (!want.count(d.group_id[r])) continue;
        out.row_id.push_back(static_cast<int64_t>(out.row_id.size() + 1));
        out.group_id.push_back(d.group_id[r]);
        out.time.push_back(d.time[r]);
        for (int i = 0; i < d.n_I; ++i) out.u.push_back(d.u[r * d.n_I + i]);
        for (int j = 0; j < d.p; ++j) out.mu.push_back(d.mu[r * d.p + j]);
        out.output_id.push_back(d.output_id[r]);
        out.y.push_back(d.y[r]);
    }
    return out;
}

} // namespace

SplitResult split(const ReshapedDataset& d, const SplitSpec& spec, uint64_t seed) {
    auto ids = d.group_ids_in_order();
    std::vector<int64_t> train_ids, val_ids, test_ids;
    if (spec.explicit_ids) {
        const auto& lists = *spec.explicit_ids;
        if (lists.size() != 3) throw ConfigError("split: explicit id spec needs 3 lists");
        std::unordered_set<int64_t> seen;
        for (const auto& list : lists)
            for (int64_t id : list)
                if (!seen.insert(id).second)
                    throw ConfigError("split: group " + std::to_string(id) +
                                      " assigned to two partitions");
        train_ids = lists[0];
        val_ids = lists[1];
        test_ids = lists[2];
    } else {
        const int total = spec.n_train + spec.n_validate + spec.n_test;
        if (total > static_cast<int>(ids.size()))
            throw ConfigError("split: requested " + std::to_string(total) + " groups, dataset has " +
                              std::to_string(ids.size()));
        Rng rng(seed);
        istft::shuffle(ids, rng);
        train_ids.assign(ids.begin(), ids.begin() + spec.n_train);
        val_ids.assign(ids.begin() + spec.n_train, ids.begin() + spec.n_train + spec.n_validate);
        test_ids.assign(ids.begin() + spec.n_train + spec.n_validate, ids.begin() + total);
    }
    return {take_groups(d, train_ids), take_groups(d, val_ids), take_groups(d, test_ids)};
}

std::vector<int> window_starts(int n_T, int n_t, int n_omega) {
    if (n_t > n_T)
        throw ConfigError("window: n_t=" + std::to_string(n_t) + " exceeds n_T=" +
                          std::to_string(n_T));
    if (n_omega < 1) throw ConfigError("window: n_omega must be >= 1");
    const int last_start = n_T - n_t + 1;
    if (n_omega > last_start)
        throw ConfigError("window: cannot place " + std::to_string(n_omega) +
                          " windows of n_t=" + std::to_string(n_t) + " in n_T=" +
                          std::to_string(n_T));
    std::vector<int> starts;
    starts.reserve(n_omega);
    if (n_omega == 1) {
        starts.push_back(1);
        return starts;
    }
    for (int j = 0; j < n_omega; ++j) {
        const double s = 1.0 + static_cast<double>(j) * (last_start - 1) / (n_omega - 1);
        starts.push_back(static_cast<int>(std::llround(s)));
    }
    return starts;
}

std::vector<Window> window(const ReshapedDataset& d, const WindowSpec& spec) {
    d.validate();
    const int n_t = spec.n_t();
    std::vector<int> starts = spec.explicit_starts;
    if (starts.empty()) starts = window_starts(d.n_T, n_t, spec.n_omega);
    for (int s : starts)
        if (s < 1 || s + n_t - 1 > d.n_T)
            throw ConfigError("window: start " + std::to_string(s) + " does not fit n_t=" +
                              std::to_string(n_t) + " within n_T=" + std::to_string(d.n_T));

    RawDataset raw = unreshape(d);
    std::vector<Window> out;
    out.reserve(raw.groups.size() * starts.size());
    for (const auto& g : raw.groups) {
        int widx = 0;
        for (int s : starts) {
            Window w;
            w.group_id = g.group_id;
            w.window_index = widx++;
            w.start = s;
            w.n_k = spec.n_k;
            w.n_tau = spec.n_tau;
            w.n_I = d.n_I;
            w.n_o = d.n_o;
            w.p = d.p;
            w.mu = g.mu;
            const int t0 = s - 1;
            w.times.assign(g.times.begin() + t0, g.times.begin() + t0 + n_t);
            w.u.assign(g.u.begin() + static_cast<size_t>(t0) * d.n_I,
                       g.u.begin() + static_cast<size_t>(t0 + n_t) * d.n_I);
            w.y.assign(g.y.begin() + static_cast<size_t>(t0) * d.n_o,
                       g.y.begin() + static_cast<size_t>(t0 + n_t) * d.n_o);
            out.push_back(std::move(w));
        }
    }
    return out;
}

// ------------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& what, size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw DataError("csv line " + std::to_string(line_no) + ": cannot parse " + what + " '" +
                        s + "'");
    return v;
}

int64_t parse_int(const std::string& s, const std::string& what, size_t line_no) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw DataError("csv line " + std::to_string(line_no) + ": cannot parse " + what + " '" +
                        s + "'");
    return v;
}

struct HeaderInfo {
    int n_I = 0, p = 0, n_o = 0; // n_o only for raw layout
    bool reshaped = false;
};

HeaderInfo parse_header(const std::vector<std::string>& h, const std::string& path) {
    HeaderInfo info;
    size_t i = 0;
    auto need = [&](const char* name) {
        if (i >= h.size() || h[i] != name)
            throw DataError(path + ": header column " + std::to_string(i + 1) + " must be '" +
                            name + "'");
        ++i;
    };
    need("row_id");
    need("group_id");
    need("time");
    while (i < h.size() && h[i] == "u_" + std::to_string(info.n_I + 1)) ++i, ++info.n_I;
    while (i < h.size() && h[i] == "mu_" + std::to_string(info.p + 1)) ++i, ++info.p;
    if (i < h.size() && h[i] == "output_id") {
        info.reshaped = true;
        ++i;
        need("y");
    } else {
        while (i < h.size() && h[i] == "y_" + std::to_string(info.n_o + 1)) ++i, ++info.n_o;
        if (info.n_o == 0) throw DataError(path + ": no output columns found in header");
    }
    if (i != h.size()) throw DataError(path + ": unexpected trailing header column '" + h[i] + "'");
    return info;
}

} // namespace

void write_csv(const ReshapedDataset& d, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << "row_id,group_id,time";
    for (int i = 1; i <= d.n_I; ++i) f << ",u_" << i;
    for (int j = 1; j <= d.p; ++j) f << ",mu_" << j;
    f << ",output_id,y\n";
    for (size_t r = 0; r < d.row_count(); ++r) {
        f << d.row_id[r] << ',' << d.group_id[r] << ',' << fmt17(d.time[r]);
        for (int i = 0; i < d.n_I; ++i) f << ',' << fmt17(d.u[r * d.n_I + i]);
        for (int j = 0; j < d.p; ++j) f << ',' << fmt17(d.mu[r * d.p + j]);
        f << ',' << d.output_id[r] << ',' << fmt17(d.y[r]) << '\n';
    }
    if (!f) throw DataError("write to '" + path + "' failed");
}

ReshapedDataset read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw DataError(path + ": empty file");
    const auto header = parse_header(split_line(line, ','), path);
    if (!header.reshaped)
        throw DataError(path + ": expected long-layout header with output_id column");

    ReshapedDataset d;
    d.n_I = header.n_I;
    d.p = header.p;
    const size_t n_cols = 3 + header.n_I + header.p + 2;
    size_t line_no = 1;
    int max_oid = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_line(line, ',');
        if (fields.size() != n_cols)
            throw DataError(path + " line " + std::to_string(line_no) + ": has " +
                            std::to_string(fields.size()) + " columns, expected " +
                            std::to_string(n_cols));
        size_t c = 0;
        d.row_id.push_back(parse_int(fields[c++], "row_id", line_no));
        d.group_id.push_back(parse_int(fields[c++], "group_id", line_no));
        d.time.push_back(parse_double(fields[c++], "time", line_no));
        for (int i = 0; i < d.n_I; ++i) d.u.push_back(parse_double(fields[c++], "u", line_no));
        for (int j = 0; j < d.p; ++j) d.mu.push_back(parse_double(fields[c++], "mu", line_no));
        const int oid = static_cast<int>(parse_int(fields[c++], "output_id", line_no));
        d.output_id.push_back(oid);
        max_oid = std::max(max_oid, oid);
        d.y.push_back(parse_double(fields[c++], "y", line_no));
    }
    if (d.row_count() == 0) throw DataError(path + ": no data rows");
    d.n_o = max_oid;
    if (d.row_count() % d.n_o != 0)
        throw DataError(path + ": row count is not a multiple of the declared output count");
    d.n_T = 0;
    // infer n_T from the first group
    for (size_t r = 0; r < d.row_count(); ++r) {
        if (d.group_id[r] != d.group_id[0]) break;
        if (d.output_id[r] == 1) ++d.n_T;
    }
    d.validate();
    return d;
}

void write_raw_csv(const RawDataset& d, const std::string& path) {
    d.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << "row_id,group_id,time";
    for (int i = 1; i <= d.n_I; ++i) f << ",u_" << i;
    for (int j = 1; j <= d.p; ++j) f << ",mu_" << j;
    for (int k = 1; k <= d.n_o; ++k) f << ",y_" << k;
    f << '\n';
    int64_t rid = 1;
    for (const auto& g : d.groups) {
        for (int t = 0; t < d.n_T; ++t) {
            f << rid++ << ',' << g.group_id << ',' << fmt17(g.times[t]);
            for (int i = 0; i < d.n_I; ++i) f << ',' << fmt17(g.u[static_cast<size_t>(t) * d.n_I + i]);
            for (int j = 0; j < d.p; ++j) f << ',' << fmt17(g.mu[j]);
            for (int k = 0; k < d.n_o; ++k) f << ',' << fmt17(g.y[static_cast<size_t>(t) * d.n_o + k]);
            f << '\n';
        }
    }
    if (!f) throw DataError("write to '" + path + "' failed");
}

RawDataset read_raw_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw DataError(path + ": empty file");
    const auto header = parse_header(split_line(line, ','), path);
    if (header.reshaped)
        throw DataError(path + ": expected wide-layout header with y_1..y_no columns");

    RawDataset d;
    d.n_I = header.n_I;
    d.p = header.p;
    d.n_o = header.n_o;
    const size_t n_cols = 3 + header.n_I + header.p + header.n_o;
    size_t line_no = 1;
    RawGroup* cur = nullptr;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_line(line, ',');
        if (fields.size() != n_cols)
            throw DataError(path + " line " + std::to_string(line_no) + ": has " +
                            std::to_string(fields.size()) + " columns, expected " +
                            std::to_string(n_cols));
        size_t c = 1; // row_id unused on input
        const int64_t gid = parse_int(fields[c++], "group_id", line_no);
        if (!cur || cur->group_id != gid) {
            d.groups.push_back({});
            cur = &d.groups.back();
            cur->group_id = gid;
        }
        cur->times.push_back(parse_double(fields[c++], "time", line_no));
        for (int i = 0; i < d.n_I; ++i) cur->u.push_back(parse_double(fields[c++], "u", line_no));
        std::vector<double> mu_row(d.p);
        for (int j = 0; j < d.p; ++j) mu_row[j] = parse_double(fields[c++], "mu", line_no);
        if (cur->mu.empty()) cur->mu = mu_row;
        for (int k = 0; k < d.n_o; ++k) cur->y.push_back(parse_double(fields[c++], "y", line_no));
    }
    if (d.groups.empty()) throw DataError(path + ": no data rows");
    d.n_T = static_cast<int>(d.groups[0].times.size());
    d.validate();
    return d;
}

// ------------------------------------------------------------- normalize

namespace {

void column_stats(const std::vector<double>& values, size_t stride, size_t offset, size_t rows,
                  double& mean, double& std_out) {
    double sum = 0.0;
    for (size_t r = 0; r < rows; ++r) sum += values[r * stride + offset];
    mean = rows ? sum / rows : 0.0;
    double ss = 0.0;
    for (size_t r = 0; r < rows; ++r) {
        const double d = values[r * stride + offset] - mean;
        ss += d * d;
    }
    const double var = rows ? ss / rows : 0.0;
    std_out = var > 0.0 ? std::sqrt(var) : 1.0; // zero-variance column passes through
}

} // namespace

NormStats compute_stats(const ReshapedDataset& train) {
    NormStats s;
    const size_t rows = train.row_count();
    s.u_mean.resize(train.n_I);
    s.u_std.resize(train.n_I);
    for (int i = 0; i < train.n_I; ++i)
        column_stats(train.u, train.n_I, i, rows, s.u_mean[i], s.u_std[i]);
    s.mu_mean.resize(train.p);
    s.mu_std.resize(train.p);
    for (int j = 0; j < train.p; ++j)
        column_stats(train.mu, train.p, j, rows, s.mu_mean[j], s.mu_std[j]);
    // y is one physical column per output id
    s.y_mean.assign(train.n_o, 0.0);
    s.y_std.assign(train.n_o, 1.0);
    for (int k = 0; k < train.n_o; ++k) {
        double sum = 0.0;
        size_t count = 0;
        for (size_t r = 0; r < rows; ++r)
            if (train.output_id[r] == k + 1) sum += train.y[r], ++count;
        const double mean = count ? sum / count : 0.0;
        double ss = 0.0;
        for (size_t r = 0; r < rows; ++r)
            if (train.output_id[r] == k + 1) ss += (train.y[r] - mean) * (train.y[r] - mean);
        const double var = count ? ss / count : 0.0;
        s.y_mean[k] = mean;
        s.y_std[k] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

namespace {

ReshapedDataset transform(const ReshapedDataset& d, const NormStats& s, bool inverse) {
    if (static_cast<int>(s.u_mean.size()) != d.n_I || static_cast<int>(s.mu_mean.size()) != d.p ||
        static_cast<int>(s.y_mean.size()) != d.n_o)
        throw DataError("normalize: statistics shape does not match dataset");
    ReshapedDataset out = d;
    const size_t rows = d.row_count();
    for (size_t r = 0; r < rows; ++r) {
        for (int i = 0; i < d.n_I; ++i) {
            double& v = out.u[r * d.n_I + i];
            v = inverse ? v * s.u_std[i] + s.u_mean[i] : (v - s.u_mean[i]) / s.u_std[i];
        }
        for (int j = 0; j < d.p; ++j) {
            double& v = out.mu[r * d.p + j];
            v = inverse ? v * s.mu_std[j] + s.mu_mean[j] : (v - s.mu_mean[j]) / s.mu_std[j];
        }
        const int k = d.output_id[r] - 1;
        double& v = out.y[r];
        v = inverse ? v * s.y_std[k] + s.y_mean[k] : (v - s.y_mean[k]) / s.y_std[k];
    }
    return out;
}

} // namespace

ReshapedDataset normalize(const ReshapedDataset& d, const NormStats& s) {
    return transform(d, s, false);
}

ReshapedDataset denormalize(const ReshapedDataset& d, const NormStats& s) {
    return transform(d, s, true);
}

Window normalize_window(const Window& w, const NormStats& s) {
    if (static_cast<int>(s.u_mean.size()) != w.n_I || static_cast<int>(s.mu_mean.size()) != w.p ||
        static_cast<int>(s.y_mean.size()) != w.n_o)
        throw DataError("normalize: statistics shape does not match window");
    Window out = w;
    for (int t = 0; t < w.n_t(); ++t)
        for (int i = 0; i < w.n_I; ++i) {
            double& v = out.u[static_cast<size_t>(t) * w.n_I + i];
            v = (v - s.u_mean[i]) / s.u_std[i];
        }
    for (int j = 0; j < w.p; ++j) out.mu[j] = (w.mu[j] - s.mu_mean[j]) / s.mu_std[j];
    for (int t = 0; t < w.n_t(); ++t)
        for (int k = 0; k < w.n_o; ++k) {
            double& v = out.y[static_cast<size_t>(t) * w.n_o + k];
            v = (v - s.y_mean[k]) / s.y_std[k];
        }
    return out;
}

} // namespace istft

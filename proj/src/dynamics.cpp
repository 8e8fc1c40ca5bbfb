#include "istft/dynamics.hpp"

#include <cmath>

#include "istft/kernels.hpp"

namespace istft {

// --------------------------------------------------------------- Lorenz-63

void Lorenz63Config::validate() const {
    if (!(dt > 0.0)) throw ConfigError("lorenz63: dt must be positive");
    if (n_T < 2) throw ConfigError("lorenz63: n_T must be >= 2");
    if (n_p < 1) throw ConfigError("lorenz63: n_p must be >= 1");
    if (y1_lo > y1_hi || y2_lo > y2_hi || y3_lo > y3_hi)
        throw ConfigError("lorenz63: empty initial-state box");
}

std::array<double, 3> lorenz_rhs(const std::array<double, 3>& y, double sigma, double rho,
                                 double beta) {
    return {sigma * (y[1] - y[0]), y[0] * (rho - y[2]) - y[1], y[0] * y[1] - beta * y[2]};
}

std::array<double, 3> lorenz_rk4_step(const std::array<double, 3>& y, double dt, double sigma,
                                      double rho, double beta) {
    auto axpy = [](const std::array<double, 3>& a, double s, const std::array<double, 3>& b) {
        return std::array<double, 3>{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
    };
    const auto k1 = lorenz_rhs(y, sigma, rho, beta);
    const auto k2 = lorenz_rhs(axpy(y, dt / 2, k1), sigma, rho, beta);
    const auto k3 = lorenz_rhs(axpy(y, dt / 2, k2), sigma, rho, beta);
    const auto k4 = lorenz_rhs(axpy(y, dt, k3), sigma, rho, beta);
    return {y[0] + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            y[1] + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
            y[2] + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])};
}

std::vector<std::array<double, 3>> lorenz_trajectory(const std::array<double, 3>& init, double dt,
                                                     int n_T, double sigma, double rho,
                                                     double beta) {
    std::vector<std::array<double, 3>> traj;
    traj.reserve(n_T);
    traj.push_back(init);
    for (int t = 1; t < n_T; ++t)
        traj.push_back(lorenz_rk4_step(traj.back(), dt, sigma, rho, beta));
    return traj;
}

RawDataset lorenz_generate(const Lorenz63Config& cfg) {
    cfg.validate();
    RawDataset d;
    d.n_I = 0;
    d.p = 0;
    d.n_o = 3;
    d.n_T = cfg.n_T;
    d.groups.resize(cfg.n_p);
    const Rng master(cfg.seed);
    kernels::parallel_for(cfg.n_p, [&](int gi) {
        Rng rng = master.fork(static_cast<uint64_t>(gi));
        std::array<double, 3> init = {rng.uniform(cfg.y1_lo, cfg.y1_hi),
                                      rng.uniform(cfg.y2_lo, cfg.y2_hi),
                                      rng.uniform(cfg.y3_lo, cfg.y3_hi)};
        RawGroup g;
        g.group_id = gi + 1;
        g.times.resize(cfg.n_T);
        g.y.resize(static_cast<size_t>(cfg.n_T) * 3);
        const auto traj = lorenz_trajectory(init, cfg.dt, cfg.n_T, cfg.sigma, cfg.rho, cfg.beta);
        for (int t = 0; t < cfg.n_T; ++t) {
            g.times[t] = t * cfg.dt;
            for (int k = 0; k < 3; ++k) g.y[static_cast<size_t>(t) * 3 + k] = traj[t][k];
        }
        d.groups[gi] = std::move(g);
    });
    return d;
}

// --------------------------------------------------------- FitzHugh-Nagumo

void FhnConfig::validate() const {
    if (eps_lo > eps_hi || c_lo > c_hi) throw ConfigError("fhn: empty parameter box");
    if (eps_lo < 0.01 - 1e-12 || eps_hi > 0.04 + 1e-12)
        throw ConfigError("fhn: eps bounds [" + std::to_string(eps_lo) + ", " +
                          std::to_string(eps_hi) + "] outside the benchmark box [0.01, 0.04]");
    if (c_lo < 0.025 - 1e-12 || c_hi > 0.075 + 1e-12)
        throw ConfigError("fhn: c bounds [" + std::to_string(c_lo) + ", " + std::to_string(c_hi) +
                          "] outside the benchmark box [0.025, 0.075]");
    if (n_x < 32) throw ConfigError("fhn: n_x must be >= 32");
    if (substeps < 1) throw ConfigError("fhn: substeps must be >= 1");
    if (n_T < 2) throw ConfigError("fhn: n_T must be >= 2");
    if (!(dt_out > 0.0)) throw ConfigError("fhn: dt_out must be positive");
    if (n_p < 1) throw ConfigError("fhn: n_p must be >= 1");
}

double fhn_input(double t) { return 5e4 * t * t * t * std::exp(-15.0 * t); }

double fhn_cubic(double v) { return v * (v - 0.1) * (1.0 - v); }

namespace {

// Solves A x = rhs for the Crank-Nicolson matrix A = I - (dt/2) L, where L is
// the second-order Laplacian with ghost-node Neumann rows. A is symmetric
// tridiagonal apart from the doubled boundary off-diagonals.
struct CnSolver {
    int n;
    double diag, off, boundary_off;
    std::vector<double> scratch_c, scratch_d;

    CnSolver(int n_x, double dt, double h) : n(n_x) {
        const double r = dt / (2.0 * h * h);
        diag = 1.0 + 2.0 * r;
        off = -r;
        boundary_off = -2.0 * r;
        scratch_c.resize(n);
        scratch_d.resize(n);
    }

    double upper(int row) const { return row == 0 ? boundary_off : off; }
    double lower(int row) const { return row == n - 1 ? boundary_off : off; }

    void solve(std::vector<double>& rhs) {
        auto& c = scratch_c;
        auto& d = scratch_d;
        c[0] = upper(0) / diag;
        d[0] = rhs[0] / diag;
        for (int i = 1; i < n; ++i) {
            const double m = diag - lower(i) * c[i - 1];
            c[i] = i < n - 1 ? upper(i) / m : 0.0;
            d[i] = (rhs[i] - lower(i) * d[i - 1]) / m;
        }
        rhs[n - 1] = d[n - 1];
        for (int i = n - 2; i >= 0; --i) rhs[i] = d[i] - c[i] * rhs[i + 1];
    }
};

// L v plus the boundary flux contribution 2 i0 / h in the first row.
void laplacian(const std::vector<double>& v, double h, double flux, std::vector<double>& out) {
    const int n = static_cast<int>(v.size());
    const double ih2 = 1.0 / (h * h);
    out[0] = 2.0 * (v[1] - v[0]) * ih2 + 2.0 * flux / h;
    for (int j = 1; j < n - 1; ++j) out[j] = (v[j - 1] - 2.0 * v[j] + v[j + 1]) * ih2;
    out[n - 1] = 2.0 * (v[n - 2] - v[n - 1]) * ih2;
}

} // namespace

FhnBoundarySeries fhn_solve(double eps, double c, const FhnConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_x;
    const double h = cfg.length / (n - 1);
    const double dt = cfg.dt_out / cfg.substeps;

    std::vector<double> v(n, 0.0), w(n, 0.0), lap(n), rhs(n);
    CnSolver solver(n, dt, h);

    FhnBoundarySeries out;
    out.t.reserve(cfg.n_T);
    out.v0.reserve(cfg.n_T);
    out.w0.reserve(cfg.n_T);
    out.t.push_back(0.0);
    out.v0.push_back(v[0]);
    out.w0.push_back(w[0]);

    double t = 0.0;
    for (int step = 1; step < cfg.n_T; ++step) {
        for (int sub = 0; sub < cfg.substeps; ++sub) {
            const double flux_now = fhn_input(t);
            const double flux_next = fhn_input(t + dt);
            laplacian(v, h, flux_now, lap);
            // add the implicit half's boundary flux so the rhs carries the
            // Crank-Nicolson average 0.5*dt*(g_n + g_{n+1})
            lap[0] += 2.0 * flux_next / h;
            for (int j = 0; j < n; ++j)
                rhs[j] = v[j] + 0.5 * dt * lap[j] + dt * (fhn_cubic(v[j]) - w[j] + c) / eps;
            solver.solve(rhs);
            for (int j = 0; j < n; ++j) {
                w[j] += dt * (cfg.b * v[j] - cfg.gamma * w[j] + c);
                v[j] = rhs[j];
            }
            t += dt;
        }
        t = step * cfg.dt_out; // avoid drift in the stimulus argument
        if (!std::isfinite(v[0]) || !std::isfinite(w[0]) || std::fabs(v[0]) > 1e6)
            throw NumericError("fhn: integration diverged at t=" + std::to_string(t) +
                               " for (eps, c) = (" + std::to_string(eps) + ", " +
                               std::to_string(c) + "); reduce dt_out or increase substeps");
        out.t.push_back(t);
        out.v0.push_back(v[0]);
        out.w0.push_back(w[0]);
    }
    return out;
}

RawDataset fhn_generate(const FhnConfig& cfg) {
    cfg.validate();
    LhsSampler sampler;
    sampler.dim = 2;
    sampler.lo = {cfg.eps_lo, cfg.c_lo};
    sampler.hi = {cfg.eps_hi, cfg.c_hi};
    sampler.count = cfg.n_p;
    sampler.seed = cfg.seed;
    const auto samples = lhs_sample(sampler);

    RawDataset d;
    d.n_I = 1;
    d.p = 2;
    d.n_o = 2;
    d.n_T = cfg.n_T;
    d.groups.resize(cfg.n_p);
    kernels::parallel_for(cfg.n_p, [&](int gi) {
        const double eps = samples[gi][0];
        const double c = samples[gi][1];
        const auto series = fhn_solve(eps, c, cfg);
        RawGroup g;
        g.group_id = gi + 1;
        g.mu = {eps, c};
        g.times = series.t;
        g.u.resize(cfg.n_T);
        g.y.resize(static_cast<size_t>(cfg.n_T) * 2);
        for (int t = 0; t < cfg.n_T; ++t) {
            g.u[t] = fhn_input(series.t[t]);
            g.y[static_cast<size_t>(t) * 2] = series.v0[t];
            g.y[static_cast<size_t>(t) * 2 + 1] = series.w0[t];
        }
        d.groups[gi] = std::move(g);
    });
    return d;
}

// ------------------------------------------------------------ Latin cube

std::vector<std::vector<double>> lhs_sample(const LhsSampler& s) {
    if (s.count < 1) throw ConfigError("lhs: sample count must be >= 1");
    if (static_cast<int>(s.lo.size()) != s.dim || static_cast<int>(s.hi.size()) != s.dim)
        throw ConfigError("lhs: bounds do not match dimension");
    Rng rng(s.seed);
    std::vector<std::vector<double>> out(s.count, std::vector<double>(s.dim));
    std::vector<int> strata(s.count);
    for (int d = 0; d < s.dim; ++d) {
        for (int i = 0; i < s.count; ++i) strata[i] = i;
        istft::shuffle(strata, rng);
        const double width = (s.hi[d] - s.lo[d]) / s.count;
        for (int i = 0; i < s.count; ++i)
            out[i][d] = s.lo[d] + (strata[i] + rng.u01()) * width;
    }
    return out;
}

} // namespace istft

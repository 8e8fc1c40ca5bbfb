#include "doctest.h"

#include <cmath>

#include "istft/dynamics.hpp"

using namespace istft;

TEST_CASE("lorenz equilibrium at the origin stays exactly zero") {
    auto traj = lorenz_trajectory({0, 0, 0}, 0.01, 100, 10.0, 28.0, 8.0 / 3.0);
    for (const auto& state : traj)
        for (double v : state) CHECK(v == 0.0);
}

namespace {

// Independent single-step RK4, written against the tableau directly.
std::array<double, 3> rk4_oracle(std::array<double, 3> y, double dt) {
    auto f = [](std::array<double, 3> s) {
        return std::array<double, 3>{10.0 * (s[1] - s[0]), s[0] * (28.0 - s[2]) - s[1],
                                     s[0] * s[1] - (8.0 / 3.0) * s[2]};
    };
    std::array<double, 3> k1 = f(y), y2, y3, y4;
    for (int i = 0; i < 3; ++i) y2[i] = y[i] + 0.5 * dt * k1[i];
    std::array<double, 3> k2 = f(y2);
    for (int i = 0; i < 3; ++i) y3[i] = y[i] + 0.5 * dt * k2[i];
    std::array<double, 3> k3 = f(y3);
    for (int i = 0; i < 3; ++i) y4[i] = y[i] + dt * k3[i];
    std::array<double, 3> k4 = f(y4);
    std::array<double, 3> out;
    for (int i = 0; i < 3; ++i)
        out[i] = y[i] + dt * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) / 6.0;
    return out;
}

double diff_norm(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::array<double, 3> lorenz_state_at_t1(double dt) {
    const int steps = static_cast<int>(std::llround(1.0 / dt));
    std::array<double, 3> y = {1.0, 1.0, 1.0};
    for (int s = 0; s < steps; ++s) y = lorenz_rk4_step(y, dt, 10.0, 28.0, 8.0 / 3.0);
    return y;
}

} // namespace

TEST_CASE("one RK4 step matches an independently coded oracle") {
    const auto ours = lorenz_rk4_step({1, 1, 1}, 0.01, 10.0, 28.0, 8.0 / 3.0);
    const auto ref = rk4_oracle({1, 1, 1}, 0.01);
    for (int i = 0; i < 3; ++i) CHECK(std::fabs(ours[i] - ref[i]) < 1e-14);
}

TEST_CASE("RK4 shows fourth-order convergence under step halving") {
    // base step inside the asymptotic regime for the t=1 horizon
    const auto a = lorenz_state_at_t1(0.005);
    const auto b = lorenz_state_at_t1(0.0025);
    const auto c = lorenz_state_at_t1(0.00125);
    const double ratio = diff_norm(a, b) / diff_norm(b, c);
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("lorenz generator layout and determinism") {
    Lorenz63Config cfg;
    cfg.n_p = 3;
    cfg.n_T = 32;
    cfg.seed = 17;
    auto d = lorenz_generate(cfg);
    CHECK(d.groups.size() == 3);
    CHECK(d.n_o == 3);
    CHECK(d.n_I == 0);
    CHECK(d.p == 0);
    for (const auto& g : d.groups) {
        CHECK(g.times.size() == 32);
        CHECK(g.times[0] == 0.0);
        // initial states inside the sampling boxes
        CHECK(g.y[0] >= -20.0);
        CHECK(g.y[0] <= 20.0);
        CHECK(g.y[2] >= 10.0);
        CHECK(g.y[2] <= 40.0);
    }
    auto again = lorenz_generate(cfg);
    for (size_t i = 0; i < d.groups.size(); ++i) CHECK(d.groups[i].y == again.groups[i].y);
}

TEST_CASE("fhn closed forms") {
    CHECK(fhn_input(0.0) == 0.0);
    CHECK(fhn_input(0.2) == doctest::Approx(5e4 * 0.008 * std::exp(-3.0)).epsilon(1e-14));
    CHECK(fhn_cubic(0.0) == 0.0);
    CHECK(fhn_cubic(0.1) == 0.0);
    CHECK(fhn_cubic(1.0) == 0.0);
}

TEST_CASE("fhn starts from rest: outputs are (0,0) at t=0") {
    FhnConfig cfg;
    cfg.n_x = 64;
    cfg.n_T = 5;
    auto series = fhn_solve(0.02, 0.05, cfg);
    CHECK(series.t[0] == 0.0);
    CHECK(series.v0[0] == 0.0);
    CHECK(series.w0[0] == 0.0);
}

TEST_CASE("fhn second-order spatial convergence at the monitored boundary") {
    FhnConfig cfg;
    cfg.n_T = 501; // reach t = 5 exactly
    auto at = [&](int n_x) {
        FhnConfig c = cfg;
        c.n_x = n_x;
        return fhn_solve(0.025, 0.05, c).v0.back();
    };
    const double coarse = at(128), mid = at(256), fine = at(512);
    const double ratio = std::fabs(mid - coarse) / std::fabs(fine - mid);
    CHECK(ratio > 3.0);
    CHECK(ratio < 6.0);
}

TEST_CASE("fhn generator layout, parameter recording, determinism") {
    FhnConfig cfg;
    cfg.n_p = 4;
    cfg.n_T = 50;
    cfg.n_x = 128;
    cfg.seed = 23;
    auto d = fhn_generate(cfg);
    CHECK(d.groups.size() == 4);
    CHECK(d.n_o == 2);
    CHECK(d.n_I == 1);
    CHECK(d.p == 2);
    for (const auto& g : d.groups) {
        CHECK(g.mu[0] >= cfg.eps_lo);
        CHECK(g.mu[0] <= cfg.eps_hi);
        CHECK(g.mu[1] >= cfg.c_lo);
        CHECK(g.mu[1] <= cfg.c_hi);
        CHECK(g.u[0] == 0.0); // stimulus vanishes at t=0
        for (double v : g.y) CHECK(std::isfinite(v));
    }
    auto again = fhn_generate(cfg);
    for (size_t i = 0; i < d.groups.size(); ++i) {
        CHECK(d.groups[i].y == again.groups[i].y);
        CHECK(d.groups[i].mu == again.groups[i].mu);
    }
}

TEST_CASE("fhn config validation") {
    FhnConfig cfg;
    cfg.eps_lo = 0.005; // outside the benchmark box
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    FhnConfig cfg2;
    cfg2.n_x = 8;
    CHECK_THROWS_AS(cfg2.validate(), ConfigError);
}

TEST_CASE("latin hypercube sampling") {
    SUBCASE("single sample lies inside the box") {
        LhsSampler s{2, {0.0, 10.0}, {1.0, 20.0}, 1, 5};
        auto pts = lhs_sample(s);
        REQUIRE(pts.size() == 1);
        CHECK(pts[0][0] >= 0.0);
        CHECK(pts[0][0] <= 1.0);
        CHECK(pts[0][1] >= 10.0);
        CHECK(pts[0][1] <= 20.0);
    }
    SUBCASE("count=4 in 1-D puts one sample in each quarter") {
        LhsSampler s{1, {0.0}, {1.0}, 4, 6};
        auto pts = lhs_sample(s);
        std::vector<int> occupancy(4, 0);
        for (const auto& p : pts) ++occupancy[std::min(3, static_cast<int>(p[0] * 4))];
        for (int c : occupancy) CHECK(c == 1);
    }
    SUBCASE("stratum occupancy is all ones for count=126 on the benchmark box") {
        LhsSampler s{2, {0.01, 0.025}, {0.04, 0.075}, 126, 7};
        auto pts = lhs_sample(s);
        for (int dim = 0; dim < 2; ++dim) {
            std::vector<int> occupancy(126, 0);
            for (const auto& p : pts) {
                const double unit = (p[dim] - s.lo[dim]) / (s.hi[dim] - s.lo[dim]);
                ++occupancy[std::min(125, static_cast<int>(unit * 126))];
            }
            for (int c : occupancy) CHECK(c == 1);
        }
    }
}

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "istft/data.hpp"

namespace istft {

/// Chaotic three-state benchmark, parametrized by random initial conditions.
struct Lorenz63Config {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    double dt = 0.01;
    int n_T = 256;
    int n_p = 1;
    uint64_t seed = 0;
    // initial-state sampling boxes
    double y1_lo = -20.0, y1_hi = 20.0;
    double y2_lo = -20.0, y2_hi = 20.0;
    double y3_lo = 10.0, y3_hi = 40.0;
    void validate() const;
};

std::array<double, 3> lorenz_rhs(const std::array<double, 3>& y, double sigma, double rho,
                                 double beta);
std::array<double, 3> lorenz_rk4_step(const std::array<double, 3>& y, double dt, double sigma,
                                      double rho, double beta);
/// Trajectory of n_T states including the initial one, fixed-step classic RK4.
std::vector<std::array<double, 3>> lorenz_trajectory(const std::array<double, 3>& init, double dt,
                                                     int n_T, double sigma, double rho, double beta);
/// n_p trajectories from seeded random initial states; outputs are the three
/// states, no inputs, no parameters.
RawDataset lorenz_generate(const Lorenz63Config& cfg);

/// Excitable-medium benchmark: 1-D reaction-diffusion pair driven through a
/// Neumann flux at the left boundary, monitored at that boundary.
struct FhnConfig {
    double b = 0.5;
    double gamma = 2.0;
    double eps_lo = 0.01, eps_hi = 0.04;
    double c_lo = 0.025, c_hi = 0.075;
    double length = 1.0;
    double dt_out = 0.01; // saved-step size
    int n_T = 500;        // saved instants, t_1 = 0
    int n_x = 512;        // grid points per field
    int substeps = 10;    // internal steps per saved step
    int n_p = 1;
    uint64_t seed = 0;
    void validate() const;
};

/// Boundary stimulus 5e4 t^3 exp(-15 t).
double fhn_input(double t);
/// Reaction cubic v (v - 0.1) (1 - v).
double fhn_cubic(double v);

struct FhnBoundarySeries {
    std::vector<double> t, v0, w0; // n_T values each
};

/// Single-parameter solve. Crank-Nicolson diffusion with second-order ghost
///-node Neumann boundaries, explicit reaction, substepped in time.
FhnBoundarySeries fhn_solve(double eps, double c, const FhnConfig& cfg);

/// n_p groups at Latin-hypercube parameter samples; outputs (v, w) at the
/// driven boundary, input column is the stimulus, parameters (eps, c).
RawDataset fhn_generate(const FhnConfig& cfg);

struct LhsSampler {
    int dim = 1;
    std::vector<double> lo, hi;
    int count = 1;
    uint64_t seed = 0;
};

/// One sample per equal-width stratum per dimension, strata randomly paired
/// across dimensions.
std::vector<std::vector<double>> lhs_sample(const LhsSampler& s);

} // namespace istft

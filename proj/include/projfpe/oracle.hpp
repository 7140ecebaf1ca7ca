#ifndef PROJFPE_ORACLE_HPP
#define PROJFPE_ORACLE_HPP

#include "projfpe/model.hpp"
#include "projfpe/quadrature.hpp"

#include <functional>
#include <span>
#include <vector>

namespace projfpe {

struct GaussianState {
    double mean = 0.0;
    double var = 0.0;
};

// Exact linear-model evolution: RK4 on (m' = F m, Q' = 2 F Q + A).
// Returns the state at the uniform times 0, h, 2h, ..., T.
std::vector<GaussianState> gaussian_exact(const std::function<double(double)>& f_coeff,
                                          const std::function<double(double)>& a_coeff,
                                          double mean0, double var0, double t_end,
                                          double h);

struct FdSolveResult {
    std::vector<double> density;   // at t = T, on the grid nodes
    double max_mass_drift = 0.0;   // max |mass - 1| before renormalization
    long clip_events = 0;          // nodes clipped below -1e-12
};

// Crank-Nicolson solver for dp/dt = -(f p)' + (a p)''/2 in conservative
// flux form with zero-flux boundaries, on a uniform (trapezoid) grid.
FdSolveResult fd_fpe_solve(const DiffusionModel& model, std::span<const double> p0,
                           double t_end, double dt, const QuadratureGrid& grid);

struct DensityDistances {
    double l1 = 0.0;
    double hellinger = 0.0;
    double kl = 0.0;
    bool kl_infinite = false;
};

// L1, Hellinger and KL(pa || pb) between two densities on one grid.
DensityDistances distance(const QuadratureGrid& grid, std::span<const double> pa,
                          std::span<const double> pb);

// Gaussian pdf values on the grid nodes.
std::vector<double> gaussian_density(const QuadratureGrid& grid, double mean, double var);

} // namespace projfpe

#endif

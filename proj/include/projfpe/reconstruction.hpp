#ifndef PROJFPE_RECONSTRUCTION_HPP
#define PROJFPE_RECONSTRUCTION_HPP

#include "projfpe/expfam.hpp"
#include "projfpe/model.hpp"
#include "projfpe/projection.hpp"
#include "projfpe/quadrature.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace projfpe {

// Reconstructed drift (closed form):
//   u*(x) = a'/2 + a (log p)'/2
//           - E[Lc]^T g^-1 (1/p(x)) * integral_{xmin}^{x} (c - E c) p dy,
// with the density ratio handled in log space (max-shifted exponent)
// so the prefix integrand cannot overflow. Throws TailError when the
// prefix integrand at x_min is above 1e-12 of its maximum.
std::vector<double> ustar(const DiffusionModel& model, const ExponentialFamily& family,
                          const NaturalParams& theta, double t,
                          const QuadratureGrid& grid);

// Same drift through the unexpanded prefix-integral route
//   u(x) = (1/p) * integral [ (a p)''/(2p) - P_theta alpha ] p dy,
// with (a p)''/p expanded analytically in log-density derivatives.
// Cross-validates ustar; only trustworthy where p is not negligible.
std::vector<double> ustar_prefix_form(const DiffusionModel& model,
                                      const ExponentialFamily& family,
                                      const NaturalParams& theta, double t,
                                      const QuadratureGrid& grid);

struct PdeResidualReport {
    std::vector<double> residual;  // du*/dx + (log p)' u* - B, all nodes
    std::vector<bool> interior;    // mask: p >= 1e-6 max(p), outermost panels excluded
    double max_interior = 0.0;
};

// Residual of the drift PDE the reconstruction solves, with du*/dx taken
// by per-panel spectral differentiation of the supplied grid values.
PdeResidualReport drift_pde_residual(const DiffusionModel& model,
                                     const ExponentialFamily& family,
                                     const NaturalParams& theta, double t,
                                     const QuadratureGrid& grid,
                                     std::span<const double> ustar_values);

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<long> counts;
    long n_kept = 0;

    double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};

struct PathEnsemble {
    std::size_t n_paths = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    long excluded = 0;             // exploded paths, removed from the histogram
    std::vector<double> initial;   // kept paths, in path order
    std::vector<double> terminal;
    Histogram histogram;
    QuadratureGrid terminal_grid;  // grid in force at the final trajectory point
};

struct SimulationParams {
    std::size_t n_paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 42;
    int bins = 200;
};

// Grid of drift values for the trajectory point in force (recomputed at
// every trajectory step; linearly interpolated in x between the nodes).
using DriftProvider = std::function<std::vector<double>(
    const TrajectoryPoint& point, const QuadratureGrid& grid)>;

// u* on the grid, as a DriftProvider.
DriftProvider ustar_drift(const DiffusionModel& model, const ExponentialFamily& family);

// Euler-Maruyama simulation of dY = drift dt + sigma dW along a projected
// trajectory, starting from draws of p(., theta_0). sigma comes from the
// model's diffusion coefficient. Path i consumes counter-RNG stream i, so
// results are bit-identical for a given seed regardless of scheduling.
// Throws NumericalError when more than 0.1% of paths explode
// (|Y| > 10 max|grid bound|).
PathEnsemble simulate(const DiffusionModel& model, const ExponentialFamily& family,
                      const ThetaTrajectory& trajectory, const DriftProvider& drift,
                      const SimulationParams& params, const GridPolicy& policy);

struct EmpiricalDistance {
    double l1 = 0.0;
    double hellinger = 0.0;
};

// Distances between the histogram and a density on the grid, both
// reduced to per-bin probability masses.
EmpiricalDistance empirical_distance(const Histogram& histogram,
                                     const QuadratureGrid& grid,
                                     std::span<const double> density);

} // namespace projfpe

#endif

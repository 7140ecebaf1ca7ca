#ifndef PROJFPE_EXPFAM_HPP
#define PROJFPE_EXPFAM_HPP

#include "projfpe/linalg.hpp"
#include "projfpe/polynomial.hpp"
#include "projfpe/quadrature.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace projfpe {

// Natural parameters of an exponential family.
struct NaturalParams {
    std::vector<double> theta;

    std::size_t dim() const { return theta.size(); }
};

// Finite-dimensional exponential family with polynomial sufficient
// statistics c_1..c_m and an optional fixed carrier statistic c_0
// (coefficient pinned at 1):
//
//   p(x, theta) = exp[theta^T c(x) + c_0(x) - psi(theta)].
class ExponentialFamily {
public:
    // c_i = x^i for i = 1..max_degree (max_degree even so Theta is nonempty)
    static ExponentialFamily polynomial(int max_degree);
    // c = (x) with carrier c_0 = -x^2/2 - log(2*pi)/2; p(., theta) ~ N(theta, 1)
    static ExponentialFamily mean_shift_gaussian();
    // arbitrary polynomial statistics (and optional carrier)
    static ExponentialFamily custom(std::vector<Polynomial> stats,
                                    std::optional<Polynomial> carrier,
                                    std::string basis_tag);

    int dim() const { return static_cast<int>(stats_.size()); }
    const std::vector<Polynomial>& stats() const { return stats_; }
    const Polynomial& stat(int i) const { return stats_[static_cast<std::size_t>(i)]; }
    bool has_carrier() const { return carrier_.has_value(); }
    const Polynomial& carrier() const { return *carrier_; }
    const std::string& basis_tag() const { return basis_tag_; }

    // theta^T c + c_0 as a polynomial
    Polynomial exponent(const NaturalParams& theta) const;

    // Normalizability guard: top family degree even and the combined
    // top-degree coefficient (carrier included) <= -1e-8.
    bool in_domain(const NaturalParams& theta) const;
    void require_in_domain(const NaturalParams& theta) const; // throws DomainError

private:
    ExponentialFamily(std::vector<Polynomial> stats, std::optional<Polynomial> carrier,
                      std::string basis_tag);

    std::vector<Polynomial> stats_;
    std::optional<Polynomial> carrier_;
    std::string basis_tag_;
    int top_degree_ = 0;
};

// How quadrature grids are built and when they are rebuilt.
struct GridPolicy {
    GridScheme scheme = GridScheme::GaussLegendreComposite;
    int panels = 64;
    int nodes_per_panel = 16;
    int trapezoid_nodes = 1025;
    double sigma_mult = 8.0;        // core interval is mean +- sigma_mult * sd
    double rebuild_fraction = 0.10; // rebuild when the core exits bounds by this fraction of the grid width
    double exponent_drop = 80.0;    // bounds include everything within this many nats of the exponent max
};

// Log-partition psi(theta) = log integral of exp(theta^T c + c_0), computed
// with a max-shift. Throws TailError when the boundary integrand exceeds
// 1e-12 of the total mass.
double log_partition(const ExponentialFamily& family, const NaturalParams& theta,
                     const QuadratureGrid& grid);

// Density values exp(theta^T c + c_0 - psi) at the grid nodes.
std::vector<double> density_values(const ExponentialFamily& family,
                                   const NaturalParams& theta,
                                   const QuadratureGrid& grid);

// E_theta[phi] for phi given by its node values.
double expectation(const ExponentialFamily& family, const NaturalParams& theta,
                   std::span<const double> phi_values, const QuadratureGrid& grid);

// Fisher information g_ij = Cov_theta(c_i, c_j). Throws SingularFisherError
// when the smallest eigenvalue drops below 1e-10 of the trace.
Matrix fisher_matrix(const ExponentialFamily& family, const NaturalParams& theta,
                     const QuadratureGrid& grid);

// Newton iteration on grad psi(theta) = eta with the Fisher matrix as
// Jacobian and step halving to stay inside Theta.
NaturalParams moment_match(const ExponentialFamily& family,
                           std::span<const double> target_eta,
                           const GridPolicy& policy, const NaturalParams& theta_init);

// Grid whose bounds hold the density's mass to well below the tail guard:
// union of the region within policy.exponent_drop nats of the exponent max
// and the mean +- sigma_mult * sd interval.
QuadratureGrid build_grid(const ExponentialFamily& family, const NaturalParams& theta,
                          const GridPolicy& policy);

// Rebuild rule: the mean +- sigma_mult * sd interval exits the current
// bounds by more than rebuild_fraction of the grid width.
bool grid_needs_rebuild(double mean, double sd, const QuadratureGrid& grid,
                        const GridPolicy& policy);

// Applies the rebuild rule and swaps in a fresh grid when it would
// actually change the bounds. Returns whether the grid was replaced.
bool refresh_grid(QuadratureGrid& grid, const ExponentialFamily& family,
                  const NaturalParams& theta, double mean, double sd,
                  const GridPolicy& policy);

// Mean and variance of a density given by node values.
struct MeanVar {
    double mean = 0.0;
    double var = 0.0;
};
MeanVar density_mean_var(const QuadratureGrid& grid, std::span<const double> p);

} // namespace projfpe

#endif

#include "projfpe/expfam.hpp"

#include "projfpe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace projfpe {

namespace {

constexpr double kDomainGuardSlack = -1e-8;
constexpr double kTailGuard = 1e-12;

// Largest magnitude a stationary point of the exponent can have
// (Cauchy bound on the roots of its derivative). Beyond this the
// exponent is monotone, so scans over [-R, R] see the global max.
double stationary_point_bound(const Polynomial& exponent) {
    Polynomial d = exponent.derivative();
    const auto& c = d.coefficients();
    if (c.size() <= 1) return 1.0;
    const double top = std::abs(c.back());
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i)
        m = std::max(m, std::abs(c[i]) / top);
    return 1.0 + m;
}

struct ExponentScan {
    double q_max;
    double arg_max;
    double lo; // outermost points where q crosses q_max - drop
    double hi;
};

ExponentScan scan_exponent(const Polynomial& q, double drop) {
    const double r = std::max(stationary_point_bound(q), 1.0);
    const int n_samples = 8192;
    double q_max = -std::numeric_limits<double>::infinity();
    double arg_max = 0.0;
    for (int i = 0; i <= n_samples; ++i) {
        const double x = -r + 2.0 * r * i / n_samples;
        const double v = q(x);
        if (v > q_max) {
            q_max = v;
            arg_max = x;
        }
    }
    const double threshold = q_max - drop;

    // march outward in doubling steps until q falls below the threshold,
    // then bisect the crossing
    auto outer_crossing = [&](double direction) {
        double inner = arg_max;
        double outer = arg_max + direction * std::max(r, 1.0);
        int guard = 0;
        while (q(outer) > threshold) {
            inner = outer;
            outer = arg_max + 2.0 * (outer - arg_max);
            if (++guard > 200)
                throw NumericalError("scan_exponent: exponent does not decay");
        }
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (inner + outer);
            if (q(mid) > threshold)
                inner = mid;
            else
                outer = mid;
        }
        return outer;
    };

    ExponentScan s;
    s.q_max = q_max;
    s.arg_max = arg_max;
    s.lo = outer_crossing(-1.0);
    s.hi = outer_crossing(+1.0);
    return s;
}

QuadratureGrid make_grid(double lo, double hi, const GridPolicy& policy) {
    if (policy.scheme == GridScheme::Trapezoid)
        return QuadratureGrid::trapezoid(lo, hi, policy.trapezoid_nodes);
    return QuadratureGrid::gauss_legendre(lo, hi, policy.panels, policy.nodes_per_panel);
}

// psi plus the boundary-integrand fraction, shared by log_partition and
// density_values so both apply the same tail guard.
struct PartitionEval {
    double psi;
    std::vector<double> density;
};

PartitionEval evaluate_partition(const ExponentialFamily& family,
                                 const NaturalParams& theta,
                                 const QuadratureGrid& grid) {
    family.require_in_domain(theta);
    const Polynomial q = family.exponent(theta);
    const auto& nodes = grid.nodes();
    const auto& weights = grid.weights();
    const std::size_t n = nodes.size();

    std::vector<double> qv(n);
    double q_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        qv[i] = q(nodes[i]);
        q_max = std::max(q_max, qv[i]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        qv[i] = std::exp(qv[i] - q_max);
        total += weights[i] * qv[i];
    }
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericalError("log_partition: non-finite normalization");

    const double boundary = std::max(weights.front() * qv.front(),
                                     weights.back() * qv.back());
    if (boundary > kTailGuard * total)
        throw TailError("log_partition: boundary integrand above 1e-12 of total mass");

    PartitionEval out;
    out.psi = q_max + std::log(total);
    out.density.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.density[i] = qv[i] / total;
    return out;
}

} // namespace

ExponentialFamily::ExponentialFamily(std::vector<Polynomial> stats,
                                     std::optional<Polynomial> carrier,
                                     std::string basis_tag)
    : stats_(std::move(stats)), carrier_(std::move(carrier)),
      basis_tag_(std::move(basis_tag)) {
    top_degree_ = carrier_ ? carrier_->degree() : 0;
    for (const auto& s : stats_) top_degree_ = std::max(top_degree_, s.degree());
}

ExponentialFamily ExponentialFamily::polynomial(int max_degree) {
    if (max_degree < 2 || max_degree % 2 != 0)
        throw UsageError("polynomial family: max_degree must be even and >= 2");
    std::vector<Polynomial> stats;
    stats.reserve(static_cast<std::size_t>(max_degree));
    for (int d = 1; d <= max_degree; ++d) stats.push_back(Polynomial::monomial(d));
    return ExponentialFamily(std::move(stats), std::nullopt,
                             "polynomial degrees 1.." + std::to_string(max_degree));
}

ExponentialFamily ExponentialFamily::mean_shift_gaussian() {
    std::vector<Polynomial> stats{Polynomial::monomial(1)};
    Polynomial carrier({-0.5 * std::log(2.0 * M_PI), 0.0, -0.5});
    return ExponentialFamily(std::move(stats), std::move(carrier), "mean-shift-gaussian");
}

ExponentialFamily ExponentialFamily::custom(std::vector<Polynomial> stats,
                                            std::optional<Polynomial> carrier,
                                            std::string basis_tag) {
    if (stats.empty()) throw UsageError("custom family: need at least one statistic");
    return ExponentialFamily(std::move(stats), std::move(carrier), std::move(basis_tag));
}

Polynomial ExponentialFamily::exponent(const NaturalParams& theta) const {
    if (theta.dim() != stats_.size())
        throw UsageError("exponent: theta dimension mismatch");
    Polynomial q = carrier_ ? *carrier_ : Polynomial();
    for (std::size_t i = 0; i < stats_.size(); ++i)
        q.add_scaled(stats_[i], theta.theta[i]);
    return q;
}

bool ExponentialFamily::in_domain(const NaturalParams& theta) const {
    if (theta.dim() != stats_.size())
        throw UsageError("in_domain: theta dimension mismatch");
    // The guard applies to the exponent's effective top degree, so densities
    // that embed a smaller family (zero coefficients on the highest
    // statistics) stay admissible. Leading coefficients at the quadrature
    // noise floor (1e-9 of the coefficient scale) count as zero; the ODE
    // field leaves exactly-zero components with that much jitter.
    const Polynomial q = exponent(theta);
    double scale = 0.0;
    for (double c : q.coefficients()) scale = std::max(scale, std::abs(c));
    const double floor = 1e-9 * scale;
    int d = q.degree();
    while (d >= 0 && std::abs(q.coefficient(d)) <= floor) --d;
    if (d < 2 || d % 2 != 0) return false;
    return q.coefficient(d) <= kDomainGuardSlack;
}

void ExponentialFamily::require_in_domain(const NaturalParams& theta) const {
    if (!in_domain(theta))
        throw DomainError("natural parameters outside the integrability domain");
}

double log_partition(const ExponentialFamily& family, const NaturalParams& theta,
                     const QuadratureGrid& grid) {
    return evaluate_partition(family, theta, grid).psi;
}

std::vector<double> density_values(const ExponentialFamily& family,
                                   const NaturalParams& theta,
                                   const QuadratureGrid& grid) {
    return evaluate_partition(family, theta, grid).density;
}

double expectation(const ExponentialFamily& family, const NaturalParams& theta,
                   std::span<const double> phi_values, const QuadratureGrid& grid) {
    const std::vector<double> p = density_values(family, theta, grid);
    if (phi_values.size() != p.size())
        throw UsageError("expectation: phi length mismatch");
    const auto& w = grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += w[i] * phi_values[i] * p[i];
    return s;
}

namespace {

Matrix fisher_from_density(const ExponentialFamily& family,
                           const QuadratureGrid& grid, std::span<const double> p) {
    const int m = family.dim();
    const auto& nodes = grid.nodes();
    const auto& w = grid.weights();
    const std::size_t n = nodes.size();

    std::vector<std::vector<double>> cv(static_cast<std::size_t>(m));
    std::vector<double> mean(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        auto& col = cv[static_cast<std::size_t>(i)];
        col.resize(n);
        const Polynomial& ci = family.stat(i);
        double mu = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            col[k] = ci(nodes[k]);
            mu += w[k] * col[k] * p[k];
        }
        mean[static_cast<std::size_t>(i)] = mu;
        for (std::size_t k = 0; k < n; ++k) col[k] -= mu;
    }

    Matrix g(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += w[k] * cv[static_cast<std::size_t>(i)][k] *
                     cv[static_cast<std::size_t>(j)][k] * p[k];
            g(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
            g(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) = s;
        }
    }

    double trace = 0.0;
    for (int i = 0; i < m; ++i)
        trace += g(static_cast<std::size_t>(i), static_cast<std::size_t>(i));
    if (min_eigenvalue_symmetric(g) < 1e-10 * trace)
        throw SingularFisherError("fisher_matrix: smallest eigenvalue below 1e-10 of trace");
    return g;
}

} // namespace

Matrix fisher_matrix(const ExponentialFamily& family, const NaturalParams& theta,
                     const QuadratureGrid& grid) {
    const std::vector<double> p = density_values(family, theta, grid);
    return fisher_from_density(family, grid, p);
}

// exponent with leading noise-floor coefficients removed, matching the
// effective-degree rule of the domain guard
static Polynomial effective_exponent(const Polynomial& q) {
    double scale = 0.0;
    for (double c : q.coefficients()) scale = std::max(scale, std::abs(c));
    const double floor = 1e-9 * scale;
    std::vector<double> coeffs = q.coefficients();
    while (!coeffs.empty() && std::abs(coeffs.back()) <= floor) coeffs.pop_back();
    return Polynomial(std::move(coeffs));
}

QuadratureGrid build_grid(const ExponentialFamily& family, const NaturalParams& theta,
                          const GridPolicy& policy) {
    family.require_in_domain(theta);
    const Polynomial q = effective_exponent(family.exponent(theta));
    const ExponentScan scan = scan_exponent(q, policy.exponent_drop);

    QuadratureGrid grid = make_grid(scan.lo, scan.hi, policy);
    const MeanVar mv = density_mean_var(grid, density_values(family, theta, grid));
    const double sd = std::sqrt(std::max(mv.var, 0.0));
    double lo = std::min(scan.lo, mv.mean - policy.sigma_mult * sd);
    double hi = std::max(scan.hi, mv.mean + policy.sigma_mult * sd);
    if (lo < scan.lo || hi > scan.hi) {
        // Cap the window where exp(q - q_max) stays representable, so the
        // density never underflows to an exact zero. For sharply confined
        // members (strong quartic and higher terms) the sigma-based interval
        // can reach thousands of nats below the mode; everything past 700
        // is dead space.
        const ExponentScan cap = scan_exponent(q, 700.0);
        lo = std::max(lo, cap.lo);
        hi = std::min(hi, cap.hi);
        if (lo < scan.lo || hi > scan.hi) grid = make_grid(lo, hi, policy);
    }
    return grid;
}

bool refresh_grid(QuadratureGrid& grid, const ExponentialFamily& family,
                  const NaturalParams& theta, double mean, double sd,
                  const GridPolicy& policy) {
    if (!grid_needs_rebuild(mean, sd, grid, policy)) return false;
    QuadratureGrid candidate = build_grid(family, theta, policy);
    // the representability cap can pin the bounds; adopting an identical
    // grid every step would be pure churn
    const double width = grid.x_max() - grid.x_min();
    if (std::abs(candidate.x_min() - grid.x_min()) <= 1e-9 * width &&
        std::abs(candidate.x_max() - grid.x_max()) <= 1e-9 * width)
        return false;
    grid = std::move(candidate);
    return true;
}

bool grid_needs_rebuild(double mean, double sd, const QuadratureGrid& grid,
                        const GridPolicy& policy) {
    const double lo = mean - policy.sigma_mult * sd;
    const double hi = mean + policy.sigma_mult * sd;
    const double excess = std::max(grid.x_min() - lo, hi - grid.x_max());
    return excess > policy.rebuild_fraction * (grid.x_max() - grid.x_min());
}

MeanVar density_mean_var(const QuadratureGrid& grid, std::span<const double> p) {
    if (p.size() != grid.size())
        throw UsageError("density_mean_var: length mismatch");
    const auto& nodes = grid.nodes();
    const auto& w = grid.weights();
    double mass = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        mass += w[i] * p[i];
        m1 += w[i] * nodes[i] * p[i];
    }
    const double mean = m1 / mass;
    double m2 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = nodes[i] - mean;
        m2 += w[i] * d * d * p[i];
    }
    return {mean, m2 / mass};
}

NaturalParams moment_match(const ExponentialFamily& family,
                           std::span<const double> target_eta,
                           const GridPolicy& policy, const NaturalParams& theta_init) {
    const int m = family.dim();
    if (static_cast<int>(target_eta.size()) != m)
        throw UsageError("moment_match: eta dimension mismatch");
    family.require_in_domain(theta_init);

    NaturalParams theta = theta_init;
    QuadratureGrid grid = build_grid(family, theta, policy);

    for (int iter = 0; iter < 100; ++iter) {
        const std::vector<double> p = density_values(family, theta, grid);
        const auto& nodes = grid.nodes();
        const auto& w = grid.weights();

        std::vector<double> resid(static_cast<std::size_t>(m));
        double err = 0.0;
        for (int i = 0; i < m; ++i) {
            const Polynomial& ci = family.stat(i);
            double mu = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) mu += w[k] * ci(nodes[k]) * p[k];
            resid[static_cast<std::size_t>(i)] = target_eta[static_cast<std::size_t>(i)] - mu;
            err = std::max(err, std::abs(resid[static_cast<std::size_t>(i)]));
        }
        if (err <= 1e-10) return theta;

        const Matrix g = fisher_from_density(family, grid, p);
        const SpdSolveReport step = spd_solve(g, resid);

        double lambda = 1.0;
        NaturalParams candidate = theta;
        bool accepted = false;
        for (int halve = 0; halve <= 30; ++halve) {
            for (int i = 0; i < m; ++i)
                candidate.theta[static_cast<std::size_t>(i)] =
                    theta.theta[static_cast<std::size_t>(i)] +
                    lambda * step.solution[static_cast<std::size_t>(i)];
            if (family.in_domain(candidate)) {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted)
            throw DomainError("moment_match: Newton iterate left the domain after 30 halvings");
        theta = candidate;

        const MeanVar mv = density_mean_var(grid, density_values(family, theta, grid));
        refresh_grid(grid, family, theta, mv.mean, std::sqrt(std::max(mv.var, 0.0)),
                     policy);
    }
    throw NonConvergenceError("moment_match: no convergence after 100 iterations");
}

} // namespace projfpe

#include "projfpe/geometry.hpp"

#include "projfpe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace projfpe {

namespace {

void require_same_size(const QuadratureGrid& grid, std::span<const double> v,
                       const char* what) {
    if (v.size() != grid.size()) throw UsageError(std::string(what) + ": length mismatch");
}

double weighted_mean(const QuadratureGrid& grid, std::span<const double> p,
                     std::span<const double> v) {
    const auto& w = grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * p[i] * v[i];
    return s;
}

// E_p[cosh(u/r) - 1] - 1, +infinity on overflow (treated as constraint
// violation, which pushes the bisection toward larger r).
double cosh_constraint(const QuadratureGrid& grid, std::span<const double> p,
                       std::span<const double> u, double r) {
    const auto& w = grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double z = u[i] / r;
        if (std::abs(z) > 700.0) return std::numeric_limits<double>::infinity();
        s += w[i] * p[i] * (std::cosh(z) - 1.0);
    }
    return s - 1.0;
}

} // namespace

std::vector<double> chart(const QuadratureGrid& grid, std::span<const double> p,
                          std::span<const double> q) {
    require_same_size(grid, p, "chart p");
    require_same_size(grid, q, "chart q");
    std::vector<double> u(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] > 0.0) || !(q[i] > 0.0))
            throw DomainError("chart: densities must be strictly positive on the grid");
        u[i] = std::log(q[i] / p[i]);
    }
    const double mean = weighted_mean(grid, p, u);
    for (double& x : u) x -= mean;
    return u;
}

double cumulant(const QuadratureGrid& grid, std::span<const double> p,
                std::span<const double> u) {
    require_same_size(grid, p, "cumulant p");
    require_same_size(grid, u, "cumulant u");
    const auto& w = grid.weights();
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i)
        if (p[i] > 0.0) m = std::max(m, u[i]);
    double total = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        total += w[i] * p[i] * std::exp(u[i] - m);
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericalError("cumulant: non-finite integral");
    const double boundary = std::max(w.front() * p.front() * std::exp(u.front() - m),
                                     w.back() * p.back() * std::exp(u.back() - m));
    if (boundary > 1e-12 * total)
        throw TailError("cumulant: boundary term dominates the integral");
    return m + std::log(total);
}

std::vector<double> patch(const QuadratureGrid& grid, std::span<const double> p,
                          std::span<const double> u) {
    const double k = cumulant(grid, p, u);
    std::vector<double> q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        q[i] = std::exp(u[i] - k) * p[i];
    return q;
}

double orlicz_norm(const QuadratureGrid& grid, std::span<const double> p,
                   std::span<const double> u) {
    require_same_size(grid, p, "orlicz p");
    require_same_size(grid, u, "orlicz u");
    double umax = 0.0;
    for (double x : u) umax = std::max(umax, std::abs(x));
    if (umax == 0.0) return 0.0;

    // cosh is monotone in |u|/r, so the constraint is decreasing in r;
    // expand the bracket geometrically until it straddles the root.
    double lo = std::max(umax / 50.0, 1e-8);
    double hi = std::min(umax * 50.0, 1e8);
    int guard = 0;
    while (cosh_constraint(grid, p, u, lo) < 0.0) {
        hi = lo;
        lo *= 0.02;
        if (lo < 1e-8 || ++guard > 40) return lo; // essentially zero
    }
    guard = 0;
    while (cosh_constraint(grid, p, u, hi) > 0.0) {
        lo = hi;
        hi *= 50.0;
        if (hi > 1e8) return std::numeric_limits<double>::infinity();
        if (++guard > 40) return std::numeric_limits<double>::infinity();
    }
    while ((hi - lo) > 1e-8 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (cosh_constraint(grid, p, u, mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

SqrtMapCheck sqrt_map_derivative_check(const QuadratureGrid& grid,
                                       std::span<const double> p0,
                                       std::span<const double> u,
                                       std::span<const double> v, double eps) {
    require_same_size(grid, p0, "sqrt_map p0");
    require_same_size(grid, u, "sqrt_map u");
    require_same_size(grid, v, "sqrt_map v");
    const std::size_t n = p0.size();
    const auto& w = grid.weights();

    std::vector<double> up(n), um(n);
    for (std::size_t i = 0; i < n; ++i) {
        up[i] = u[i] + eps * v[i];
        um[i] = u[i] - eps * v[i];
    }
    const std::vector<double> q = patch(grid, p0, u);
    const std::vector<double> qp = patch(grid, p0, up);
    const std::vector<double> qm = patch(grid, p0, um);

    const double ev = weighted_mean(grid, q, v);

    double num = 0.0, den = 0.0, norm_sq = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double fd = (std::sqrt(qp[i]) - std::sqrt(qm[i])) / (2.0 * eps);
        const double analytic = std::sqrt(q[i]) * 0.5 * (v[i] - ev);
        num += w[i] * (fd - analytic) * (fd - analytic);
        den += w[i] * analytic * analytic;
        norm_sq += w[i] * analytic * analytic;
        var += w[i] * q[i] * (v[i] - ev) * (v[i] - ev);
    }
    SqrtMapCheck rep;
    rep.fd_rel_error = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    rep.dh_norm_sq = norm_sq;
    rep.quarter_second_cumulant = 0.25 * var;
    const double scale = std::max({rep.dh_norm_sq, rep.quarter_second_cumulant, 1e-300});
    rep.norm_rel_mismatch = std::abs(rep.dh_norm_sq - rep.quarter_second_cumulant) / scale;
    return rep;
}

} // namespace projfpe

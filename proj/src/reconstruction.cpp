#include "projfpe/reconstruction.hpp"

#include "projfpe/errors.hpp"
#include "projfpe/linalg.hpp"
#include "projfpe/rng.hpp"

#include <algorithm>
#include <cmath>

namespace projfpe {

namespace {

// Shared pieces of both ustar routes: density, exponent values,
// projection coefficients k = g^-1 E[L c], centered statistics.
struct UstarContext {
    std::vector<double> p;
    std::vector<double> qv;  // exponent at nodes
    double q_max = 0.0;
    std::vector<double> q1v; // exponent derivative at nodes
    std::vector<std::vector<double>> centered; // c_i - E c_i at nodes
    std::vector<double> coeffs;                // g^-1 E[L c]
};

UstarContext make_context(const DiffusionModel& model, const ExponentialFamily& family,
                          const NaturalParams& theta, double t,
                          const QuadratureGrid& grid) {
    family.require_in_domain(theta);
    UstarContext ctx;
    ctx.p = density_values(family, theta, grid);

    const Polynomial q = family.exponent(theta);
    const Polynomial q1 = q.derivative();
    const auto& nodes = grid.nodes();
    const auto& w = grid.weights();
    const std::size_t n = nodes.size();
    ctx.qv.resize(n);
    ctx.q1v.resize(n);
    ctx.q_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        ctx.qv[i] = q(nodes[i]);
        ctx.q1v[i] = q1(nodes[i]);
        ctx.q_max = std::max(ctx.q_max, ctx.qv[i]);
    }

    const int m = family.dim();
    ctx.centered.resize(static_cast<std::size_t>(m));
    std::vector<double> rhs(static_cast<std::size_t>(m));
    Matrix g(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        auto& col = ctx.centered[static_cast<std::size_t>(i)];
        col.resize(n);
        const Polynomial& ci = family.stat(i);
        double mu = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            col[k] = ci(nodes[k]);
            mu += w[k] * col[k] * ctx.p[k];
        }
        for (double& x : col) x -= mu;
        const std::vector<double> lc = backward_apply(model, t, grid, ci);
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += w[k] * lc[k] * ctx.p[k];
        rhs[static_cast<std::size_t>(i)] = s;
    }
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                s += w[k] * ctx.centered[static_cast<std::size_t>(i)][k] *
                     ctx.centered[static_cast<std::size_t>(j)][k] * ctx.p[k];
            g(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = s;
            g(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) = s;
        }
    ctx.coeffs = spd_solve(g, rhs).solution;
    return ctx;
}

// node values of P_theta alpha = coeffs^T (c - E c)
std::vector<double> projected_alpha(const UstarContext& ctx, std::size_t n) {
    std::vector<double> pa(n, 0.0);
    for (std::size_t i = 0; i < ctx.centered.size(); ++i)
        for (std::size_t k = 0; k < n; ++k)
            pa[k] += ctx.coeffs[i] * ctx.centered[i][k];
    return pa;
}

// (a p)'' / p = a'' + 2 a' q' + a (q'' + q'^2)
std::vector<double> second_derivative_ratio(const DiffusionModel& model,
                                            const ExponentialFamily& family,
                                            const NaturalParams& theta, double t,
                                            const QuadratureGrid& grid,
                                            const UstarContext& ctx) {
    const Polynomial q2 = family.exponent(theta).derivative().derivative();
    const auto& nodes = grid.nodes();
    std::vector<double> v(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double x = nodes[i];
        const double a = model.diffusion.value(t, x);
        const double adx = model.diffusion.dx(t, x);
        const double adxx = model.diffusion.dxx(t, x);
        const double q1 = ctx.q1v[i];
        v[i] = adxx + 2.0 * adx * q1 + a * (q2(x) + q1 * q1);
    }
    return v;
}

} // namespace

std::vector<double> ustar(const DiffusionModel& model, const ExponentialFamily& family,
                          const NaturalParams& theta, double t,
                          const QuadratureGrid& grid) {
    const UstarContext ctx = make_context(model, family, theta, t, grid);
    const auto& nodes = grid.nodes();
    const std::size_t n = nodes.size();
    const int m = family.dim();

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = nodes[i];
        out[i] = 0.5 * model.diffusion.dx(t, x) +
                 0.5 * model.diffusion.value(t, x) * ctx.q1v[i];
    }

    std::size_t split = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (ctx.qv[i] > ctx.qv[split]) split = i;

    // weighted prefix integrals, accumulated toward the mode from each side
    std::vector<double> weighted_prefix(n, 0.0);
    std::vector<double> integrand(n), reversed(n);
    for (int ci = 0; ci < m; ++ci) {
        const auto& col = ctx.centered[static_cast<std::size_t>(ci)];
        double peak = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            integrand[i] = col[i] * std::exp(ctx.qv[i] - ctx.q_max);
            peak = std::max(peak, std::abs(integrand[i]));
        }
        if (std::abs(integrand.front()) > 1e-12 * peak)
            throw TailError("ustar: prefix integrand not negligible at x_min");
        // The centered integrand has zero total mass, so the prefix up to x
        // equals minus the integral from x onward. Accumulating from the
        // near side of the mode keeps the quadrature error at the local
        // integrand scale, which the 1/p factor then cannot amplify.
        const std::vector<double> prefix = grid.cumulative_integral(integrand);
        for (std::size_t i = 0; i < n; ++i) reversed[i] = integrand[n - 1 - i];
        const std::vector<double> suffix_rev = grid.cumulative_integral(reversed);
        const double k = ctx.coeffs[static_cast<std::size_t>(ci)];
        for (std::size_t i = 0; i < n; ++i)
            weighted_prefix[i] += k * (i <= split ? prefix[i] : -suffix_rev[n - 1 - i]);
    }

    // Where the exponent sits more than 600 nats below its max the density
    // ratio overflows; the density there is far below anything a path can
    // reach, so the projection term is continued as a constant instead.
    constexpr double kExpCap = 600.0;
    for (std::size_t step = 0; step <= split; ++step) {
        const std::size_t i = split - step;
        if (ctx.q_max - ctx.qv[i] <= kExpCap)
            out[i] -= weighted_prefix[i] * std::exp(ctx.q_max - ctx.qv[i]);
        else
            out[i] = out[i + 1];
    }
    for (std::size_t i = split + 1; i < n; ++i) {
        if (ctx.q_max - ctx.qv[i] <= kExpCap)
            out[i] -= weighted_prefix[i] * std::exp(ctx.q_max - ctx.qv[i]);
        else
            out[i] = out[i - 1];
    }
    return out;
}

std::vector<double> ustar_prefix_form(const DiffusionModel& model,
                                      const ExponentialFamily& family,
                                      const NaturalParams& theta, double t,
                                      const QuadratureGrid& grid) {
    const UstarContext ctx = make_context(model, family, theta, t, grid);
    const std::size_t n = grid.size();
    const std::vector<double> v1 =
        second_derivative_ratio(model, family, theta, t, grid, ctx);
    const std::vector<double> pa = projected_alpha(ctx, n);

    std::vector<double> integrand(n);
    for (std::size_t i = 0; i < n; ++i)
        integrand[i] = (0.5 * v1[i] - pa[i]) * ctx.p[i];
    const std::vector<double> prefix = grid.cumulative_integral(integrand);

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = prefix[i] / ctx.p[i];
    return out;
}

PdeResidualReport drift_pde_residual(const DiffusionModel& model,
                                     const ExponentialFamily& family,
                                     const NaturalParams& theta, double t,
                                     const QuadratureGrid& grid,
                                     std::span<const double> ustar_values) {
    if (ustar_values.size() != grid.size())
        throw UsageError("drift_pde_residual: ustar length mismatch");
    const UstarContext ctx = make_context(model, family, theta, t, grid);
    const std::size_t n = grid.size();
    const std::vector<double> v1 =
        second_derivative_ratio(model, family, theta, t, grid, ctx);
    const std::vector<double> pa = projected_alpha(ctx, n);
    const std::vector<double> du = grid.derivative_values(ustar_values);

    double p_max = 0.0;
    for (double v : ctx.p) p_max = std::max(p_max, v);

    PdeResidualReport rep;
    rep.residual.resize(n);
    rep.interior.assign(n, false);
    const std::size_t panel = static_cast<std::size_t>(grid.nodes_per_panel());
    for (std::size_t i = 0; i < n; ++i) {
        const double b = 0.5 * v1[i] - pa[i];
        rep.residual[i] = du[i] + ctx.q1v[i] * ustar_values[i] - b;
        const bool in_edge_panel = i < panel || i >= n - panel;
        if (!in_edge_panel && ctx.p[i] >= 1e-6 * p_max) {
            rep.interior[i] = true;
            rep.max_interior = std::max(rep.max_interior, std::abs(rep.residual[i]));
        }
    }
    return rep;
}

namespace {

// piecewise-linear inverse CDF sample over the grid nodes
double sample_inverse_cdf(const QuadratureGrid& grid, const std::vector<double>& cdf,
                          double mass, double u) {
    const auto& x = grid.nodes();
    const double target = u * mass;
    auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.begin()) return x.front();
    if (it == cdf.end()) return x.back();
    const std::size_t i = static_cast<std::size_t>(it - cdf.begin());
    const double c0 = cdf[i - 1], c1 = cdf[i];
    if (!(c1 > c0)) return x[i];
    const double frac = (target - c0) / (c1 - c0);
    return x[i - 1] + frac * (x[i] - x[i - 1]);
}

double interp_linear(const std::vector<double>& x, const std::vector<double>& y,
                     double xi) {
    if (xi <= x.front()) return y.front();
    if (xi >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), xi);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double frac = (xi - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + frac * (y[i] - y[i - 1]);
}

} // namespace

DriftProvider ustar_drift(const DiffusionModel& model, const ExponentialFamily& family) {
    return [&model, &family](const TrajectoryPoint& pt, const QuadratureGrid& grid) {
        return ustar(model, family, pt.theta, pt.t, grid);
    };
}

PathEnsemble simulate(const DiffusionModel& model, const ExponentialFamily& family,
                      const ThetaTrajectory& trajectory, const DriftProvider& drift_provider,
                      const SimulationParams& params, const GridPolicy& policy) {
    if (trajectory.points.empty())
        throw UsageError("simulate: empty trajectory");
    if (!trajectory.completed)
        throw UsageError("simulate: trajectory did not complete");
    if (params.n_paths < 1) throw UsageError("simulate: need at least one path");
    if (!(params.dt > 0.0) || params.dt > trajectory.step + 1e-15)
        throw UsageError("simulate: need 0 < dt <= trajectory step");
    if (params.bins < 2) throw UsageError("simulate: need at least 2 bins");

    const auto& pts = trajectory.points;
    const double t_end = pts.back().t;
    const long n_steps = std::lround(t_end / params.dt);
    const double sqrt_dt = std::sqrt(params.dt);

    QuadratureGrid grid = build_grid(family, pts.front().theta, policy);

    // initial draws from p(., theta_0)
    const std::vector<double> p0 = density_values(family, pts.front().theta, grid);
    const std::vector<double> cdf = grid.cumulative_integral(p0);
    const double mass = grid.integrate(p0);

    const std::size_t n_paths = params.n_paths;
    std::vector<double> y(n_paths);
    std::vector<double> y0(n_paths);
    std::vector<char> dead(n_paths, 0);
    std::vector<NormalStream> streams;
    streams.reserve(n_paths);
    for (std::size_t j = 0; j < n_paths; ++j) {
        streams.emplace_back(params.seed, static_cast<std::uint64_t>(j));
        y[j] = sample_inverse_cdf(grid, cdf, mass, streams[j].uniform());
        y0[j] = y[j];
    }

    std::vector<double> drift;
    std::size_t drift_index = static_cast<std::size_t>(-1);
    long n_excluded = 0;
    const double explode_at =
        10.0 * std::max(std::abs(grid.x_min()), std::abs(grid.x_max()));

    for (long s = 0; s < n_steps; ++s) {
        const double t = static_cast<double>(s) * params.dt;
        std::size_t idx = static_cast<std::size_t>(
            std::floor(t / trajectory.step + 1e-9));
        idx = std::min(idx, pts.size() - 1);
        if (idx != drift_index) {
            refresh_grid(grid, family, pts[idx].theta, pts[idx].mean,
                         std::sqrt(std::max(pts[idx].var, 0.0)), policy);
            drift = drift_provider(pts[idx], grid);
            if (drift.size() != grid.size())
                throw UsageError("simulate: drift provider returned wrong length");
            drift_index = idx;
        }
        const auto& gx = grid.nodes();
        for (std::size_t j = 0; j < n_paths; ++j) {
            if (dead[j]) continue;
            const double u = interp_linear(gx, drift, y[j]);
            const double a = model.diffusion.value(t, y[j]);
            y[j] += u * params.dt + std::sqrt(a) * sqrt_dt * streams[j].normal();
            if (std::abs(y[j]) > explode_at) {
                dead[j] = 1;
                ++n_excluded;
            }
        }
    }

    if (static_cast<double>(n_excluded) > 0.001 * static_cast<double>(n_paths))
        throw NumericalError("simulate: more than 0.1% of paths exploded");

    // terminal grid for the histogram window
    {
        const TrajectoryPoint& last = pts.back();
        refresh_grid(grid, family, last.theta, last.mean,
                     std::sqrt(std::max(last.var, 0.0)), policy);
    }

    PathEnsemble ens;
    ens.n_paths = n_paths;
    ens.dt = params.dt;
    ens.seed = params.seed;
    ens.excluded = n_excluded;
    ens.terminal_grid = grid;
    ens.histogram.lo = grid.x_min();
    ens.histogram.hi = grid.x_max();
    ens.histogram.counts.assign(static_cast<std::size_t>(params.bins), 0);
    const double width = ens.histogram.bin_width();
    ens.initial.reserve(n_paths);
    ens.terminal.reserve(n_paths);
    for (std::size_t j = 0; j < n_paths; ++j) {
        if (dead[j]) continue;
        ens.initial.push_back(y0[j]);
        ens.terminal.push_back(y[j]);
        long b = static_cast<long>(std::floor((y[j] - ens.histogram.lo) / width));
        b = std::clamp(b, 0L, static_cast<long>(params.bins) - 1);
        ++ens.histogram.counts[static_cast<std::size_t>(b)];
        ++ens.histogram.n_kept;
    }
    return ens;
}

EmpiricalDistance empirical_distance(const Histogram& histogram,
                                     const QuadratureGrid& grid,
                                     std::span<const double> density) {
    if (density.size() != grid.size())
        throw UsageError("empirical_distance: density length mismatch");
    if (histogram.n_kept <= 0) throw UsageError("empirical_distance: empty histogram");
    if (histogram.lo < grid.x_min() - 1e-12 || histogram.hi > grid.x_max() + 1e-12)
        throw UsageError("empirical_distance: histogram window outside the grid");

    // cumulative mass through (x_min, 0), nodes, (x_max, total)
    const std::vector<double> cdf = grid.cumulative_integral(density);
    const double total = grid.integrate(density);
    const auto& x = grid.nodes();
    auto cdf_at = [&](double xi) {
        if (xi <= grid.x_min()) return 0.0;
        if (xi >= grid.x_max()) return total;
        if (xi <= x.front()) {
            const double f = (xi - grid.x_min()) / (x.front() - grid.x_min());
            return f * cdf.front();
        }
        if (xi >= x.back()) {
            const double f = (xi - x.back()) / (grid.x_max() - x.back());
            return cdf.back() + f * (total - cdf.back());
        }
        const auto it = std::upper_bound(x.begin(), x.end(), xi);
        const std::size_t i = static_cast<std::size_t>(it - x.begin());
        const double f = (xi - x[i - 1]) / (x[i] - x[i - 1]);
        return cdf[i - 1] + f * (cdf[i] - cdf[i - 1]);
    };

    const std::size_t bins = histogram.counts.size();
    const double width = histogram.bin_width();
    EmpiricalDistance d;
    double h2 = 0.0;
    double prev = cdf_at(histogram.lo);
    for (std::size_t b = 0; b < bins; ++b) {
        const double edge = histogram.lo + width * static_cast<double>(b + 1);
        const double next = cdf_at(edge);
        const double model_mass = std::max(next - prev, 0.0) / total;
        prev = next;
        const double empirical_mass =
            static_cast<double>(histogram.counts[b]) / static_cast<double>(histogram.n_kept);
        d.l1 += std::abs(empirical_mass - model_mass);
        const double ds = std::sqrt(empirical_mass) - std::sqrt(model_mass);
        h2 += ds * ds;
    }
    d.hellinger = std::sqrt(0.5 * h2);
    return d;
}

} // namespace projfpe

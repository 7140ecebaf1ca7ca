#include "projfpe/oracle.hpp"

#include "projfpe/errors.hpp"
#include "projfpe/ode.hpp"

#include <algorithm>
#include <cmath>

namespace projfpe {

std::vector<GaussianState> gaussian_exact(const std::function<double(double)>& f_coeff,
                                          const std::function<double(double)>& a_coeff,
                                          double mean0, double var0, double t_end,
                                          double h) {
    if (!(var0 > 0.0)) throw UsageError("gaussian_exact: initial variance must be positive");
    if (!(t_end > 0.0) || !(h > 0.0))
        throw UsageError("gaussian_exact: T and h must be positive");
    const long n_steps = std::lround(t_end / h);
    if (n_steps < 1 || std::abs(t_end / h - static_cast<double>(n_steps)) > 1e-9)
        throw UsageError("gaussian_exact: T must be an integer multiple of h");

    const VectorField field = [&](double t, const std::vector<double>& y) {
        return std::vector<double>{f_coeff(t) * y[0], 2.0 * f_coeff(t) * y[1] + a_coeff(t)};
    };

    std::vector<GaussianState> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    std::vector<double> y{mean0, var0};
    out.push_back({y[0], y[1]});
    for (long k = 0; k < n_steps; ++k) {
        y = rk4_step(field, static_cast<double>(k) * h, y, h);
        if (!(y[1] > 0.0))
            throw NumericalError("gaussian_exact: variance left the positive half-line");
        out.push_back({y[0], y[1]});
    }
    return out;
}

FdSolveResult fd_fpe_solve(const DiffusionModel& model, std::span<const double> p0,
                           double t_end, double dt, const QuadratureGrid& grid) {
    if (grid.scheme() != GridScheme::Trapezoid)
        throw UsageError("fd_fpe_solve: needs a uniform trapezoid grid");
    const std::size_t n = grid.size();
    if (p0.size() != n) throw UsageError("fd_fpe_solve: p0 length mismatch");
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw UsageError("fd_fpe_solve: bad dt or T");
    const double mass0 = grid.integrate(p0);
    if (std::abs(mass0 - 1.0) > 1e-8)
        throw UsageError("fd_fpe_solve: initial density mass must be 1");

    const long n_steps = std::lround(t_end / dt);
    if (std::abs(t_end / dt - static_cast<double>(n_steps)) > 1e-9)
        throw UsageError("fd_fpe_solve: T must be an integer multiple of dt");

    const auto& x = grid.nodes();
    const double dx = x[1] - x[0];

    // generator rows: dp_i/dt = sub_i p_{i-1} + diag_i p_i + sup_i p_{i+1},
    // from fluxes J_{i+1/2} = f_{i+1/2} (p_i + p_{i+1})/2 - [(ap)_{i+1} - (ap)_i]/(2 dx)
    // with J = 0 at both domain ends (zero flux, conserves sum p exactly)
    auto build_rows = [&](double t, std::vector<double>& sub, std::vector<double>& diag,
                          std::vector<double>& sup) {
        std::vector<double> fh(n - 1), av(n);
        for (std::size_t i = 0; i + 1 < n; ++i)
            fh[i] = model.drift.value(t, 0.5 * (x[i] + x[i + 1]));
        for (std::size_t i = 0; i < n; ++i) {
            av[i] = model.diffusion.value(t, x[i]);
            if (!(av[i] > 0.0))
                throw NumericalError("fd_fpe_solve: diffusion coefficient not positive");
        }
        sub.assign(n, 0.0);
        diag.assign(n, 0.0);
        sup.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (i + 1 < n) { // outgoing/incoming flux at i+1/2
                diag[i] += (-0.5 * fh[i] - av[i] / (2.0 * dx)) / dx;
                sup[i] += (-0.5 * fh[i] + av[i + 1] / (2.0 * dx)) / dx;
            }
            if (i > 0) { // flux at i-1/2
                diag[i] += (0.5 * fh[i - 1] - av[i] / (2.0 * dx)) / dx;
                sub[i] += (0.5 * fh[i - 1] + av[i - 1] / (2.0 * dx)) / dx;
            }
        }
    };

    auto thomas = [&](const std::vector<double>& a, const std::vector<double>& b,
                      const std::vector<double>& c, std::vector<double>& d) {
        std::vector<double> cp(n), dp(n);
        cp[0] = c[0] / b[0];
        dp[0] = d[0] / b[0];
        for (std::size_t i = 1; i < n; ++i) {
            const double denom = b[i] - a[i] * cp[i - 1];
            cp[i] = c[i] / denom;
            dp[i] = (d[i] - a[i] * dp[i - 1]) / denom;
        }
        d[n - 1] = dp[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) d[i] = dp[i] - cp[i] * d[i + 1];
    };

    FdSolveResult res;
    std::vector<double> p(p0.begin(), p0.end());
    std::vector<double> sub0, diag0, sup0, sub1, diag1, sup1;
    std::vector<double> rhs(n), ia(n), ib(n), ic(n);

    for (long step = 0; step < n_steps; ++step) {
        const double t0 = static_cast<double>(step) * dt;
        build_rows(t0, sub0, diag0, sup0);
        build_rows(t0 + dt, sub1, diag1, sup1);

        for (std::size_t i = 0; i < n; ++i) {
            rhs[i] = p[i] + 0.5 * dt * (diag0[i] * p[i] + (i > 0 ? sub0[i] * p[i - 1] : 0.0) +
                                        (i + 1 < n ? sup0[i] * p[i + 1] : 0.0));
            ia[i] = -0.5 * dt * sub1[i];
            ib[i] = 1.0 - 0.5 * dt * diag1[i];
            ic[i] = -0.5 * dt * sup1[i];
        }
        thomas(ia, ib, ic, rhs);
        p.swap(rhs);

        double mass = grid.integrate(p);
        res.max_mass_drift = std::max(res.max_mass_drift, std::abs(mass - 1.0));
        if (std::abs(mass - 1.0) > 1e-6)
            throw NumericalError("fd_fpe_solve: mass drift above 1e-6");
        bool clipped = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (p[i] < 0.0) {
                if (p[i] < -1e-12) ++res.clip_events;
                p[i] = 0.0;
                clipped = true;
            }
        }
        if (res.clip_events > static_cast<long>(n))
            throw NumericalError("fd_fpe_solve: clip count exceeded grid size");
        if (clipped) mass = grid.integrate(p);
        for (std::size_t i = 0; i < n; ++i) p[i] /= mass;
    }
    res.density = std::move(p);
    return res;
}

DensityDistances distance(const QuadratureGrid& grid, std::span<const double> pa,
                          std::span<const double> pb) {
    if (pa.size() != grid.size() || pb.size() != grid.size())
        throw UsageError("distance: length mismatch");
    const auto& w = grid.weights();
    DensityDistances d;
    double h2 = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        d.l1 += w[i] * std::abs(pa[i] - pb[i]);
        const double ds = std::sqrt(std::max(pa[i], 0.0)) - std::sqrt(std::max(pb[i], 0.0));
        h2 += w[i] * ds * ds;
        if (pa[i] > 0.0) {
            if (pb[i] > 0.0)
                d.kl += w[i] * pa[i] * std::log(pa[i] / pb[i]);
            else
                d.kl_infinite = true;
        }
    }
    d.hellinger = std::sqrt(0.5 * h2);
    if (d.kl_infinite) d.kl = std::numeric_limits<double>::infinity();
    return d;
}

std::vector<double> gaussian_density(const QuadratureGrid& grid, double mean, double var) {
    if (!(var > 0.0)) throw UsageError("gaussian_density: variance must be positive");
    const double norm = 1.0 / std::sqrt(2.0 * M_PI * var);
    std::vector<double> p(grid.size());
    const auto& x = grid.nodes();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = x[i] - mean;
        p[i] = norm * std::exp(-0.5 * d * d / var);
    }
    return p;
}

} // namespace projfpe

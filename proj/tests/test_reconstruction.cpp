#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "projfpe/errors.hpp"
#include "projfpe/oracle.hpp"
#include "projfpe/reconstruction.hpp"

#include <cmath>
#include <vector>

using namespace projfpe;

namespace {

const GridPolicy kPolicy;

NaturalParams gaussian_theta(double mean, double var) {
    return NaturalParams{{mean / var, -0.5 / var}};
}

// nodes where the density is not negligible (1e-6 of its peak)
std::vector<std::size_t> supported_nodes(const QuadratureGrid& grid,
                                         const std::vector<double>& p) {
    double pmax = 0.0;
    for (double v : p) pmax = std::max(pmax, v);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] >= 1e-6 * pmax) idx.push_back(i);
    return idx;
}

} // namespace

TEST_CASE("ustar: linear model reconstructs its own drift") {
    const double f_coeff = -1.0, a_const = 2.0;
    const auto model = linear_model(f_coeff, a_const);
    const auto family = ExponentialFamily::polynomial(2);
    for (const auto& theta :
         {gaussian_theta(0.0, 1.0), gaussian_theta(0.5, 0.3), gaussian_theta(-0.4, 1.6)}) {
        const auto grid = build_grid(family, theta, kPolicy);
        const auto u = ustar(model, family, theta, 0.0, grid);
        double sup = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double x = grid.nodes()[i];
            if (x < -4.0 || x > 4.0) continue;
            sup = std::max(sup, std::abs(u[i] - f_coeff * x));
        }
        CHECK(sup <= 1e-6);
    }
}

TEST_CASE("ustar: unit-variance model reconstructs f on the carrier family") {
    const double k = 1.0;
    const auto model = unit_variance_model(k, 2.0, 1.0, 1.0);
    const auto family = ExponentialFamily::mean_shift_gaussian();
    for (double t : {0.0, 0.37, 0.8}) {
        const NaturalParams theta{{k * t}};
        const auto grid = build_grid(family, theta, kPolicy);
        const auto u = ustar(model, family, theta, t, grid);
        const auto p = density_values(family, theta, grid);
        double sup = 0.0;
        for (std::size_t i : supported_nodes(grid, p)) {
            const double x = grid.nodes()[i];
            sup = std::max(sup, std::abs(u[i] - model.drift.value(t, x)));
        }
        CHECK(sup <= 1e-6);
    }
}

TEST_CASE("ustar: expanded and prefix-integral routes agree") {
    struct Case {
        DiffusionModel model;
        ExponentialFamily family;
        NaturalParams theta;
        double t;
    };
    std::vector<Case> cases;
    cases.push_back({linear_model(-1.0, 2.0), ExponentialFamily::polynomial(2),
                     gaussian_theta(0.5, 0.3), 0.0});
    cases.push_back({double_well_model(0.5), ExponentialFamily::polynomial(4),
                     NaturalParams{{0.1, -0.4, 0.02, -0.05}}, 0.0});
    cases.push_back({unit_variance_model(1.0, 2.0, 1.0, 1.0),
                     ExponentialFamily::mean_shift_gaussian(), NaturalParams{{0.37}}, 0.37});
    for (const auto& c : cases) {
        const auto grid = build_grid(c.family, c.theta, kPolicy);
        const auto a = ustar(c.model, c.family, c.theta, c.t, grid);
        const auto b = ustar_prefix_form(c.model, c.family, c.theta, c.t, grid);
        const auto p = density_values(c.family, c.theta, grid);
        double sup = 0.0;
        for (std::size_t i : supported_nodes(grid, p))
            sup = std::max(sup, std::abs(a[i] - b[i]));
        CHECK(sup <= 1e-8);
    }
}

TEST_CASE("ustar: drift PDE residual vanishes on interior nodes") {
    struct Case {
        DiffusionModel model;
        ExponentialFamily family;
        NaturalParams theta;
        double t;
    };
    std::vector<Case> cases;
    cases.push_back({linear_model(-1.0, 2.0), ExponentialFamily::polynomial(2),
                     gaussian_theta(0.0, 1.0), 0.0});
    cases.push_back({linear_model(-1.0, 2.0), ExponentialFamily::polynomial(2),
                     gaussian_theta(0.5, 0.3), 0.0});
    cases.push_back({double_well_model(0.5), ExponentialFamily::polynomial(4),
                     NaturalParams{{0.1, -0.4, 0.02, -0.05}}, 0.0});
    cases.push_back({unit_variance_model(1.0, 2.0, 1.0, 1.0),
                     ExponentialFamily::mean_shift_gaussian(), NaturalParams{{0.37}}, 0.37});
    for (const auto& c : cases) {
        const auto grid = build_grid(c.family, c.theta, kPolicy);
        const auto u = ustar(c.model, c.family, c.theta, c.t, grid);
        const auto rep = drift_pde_residual(c.model, c.family, c.theta, c.t, grid, u);
        CHECK(rep.max_interior <= 1e-7);
    }
}

TEST_CASE("ustar: tail guard fires on a narrow grid") {
    const auto model = linear_model(-1.0, 2.0);
    const auto family = ExponentialFamily::polynomial(2);
    const auto narrow = QuadratureGrid::gauss_legendre(-2.0, 2.0, 16, 16);
    CHECK_THROWS_AS((void)ustar(model, family, gaussian_theta(0.0, 1.0), 0.0, narrow),
                    Error); // TailError from the prefix integrand or the density guard
}

namespace {

ThetaTrajectory constant_trajectory(const DiffusionModel& model,
                                    const ExponentialFamily& family,
                                    const NaturalParams& theta, double t_end, double h) {
    return integrate_theta(model, family, theta, t_end, h, kPolicy);
}

} // namespace

TEST_CASE("simulate: Brownian increments have the right variance") {
    // zero drift, unit diffusion: Var(Y_T - Y_0) = T
    const auto model = linear_model(0.0, 1.0);
    const auto family = ExponentialFamily::polynomial(2);
    const auto traj = constant_trajectory(model, family, gaussian_theta(0.0, 1.0), 1.0, 1e-2);
    REQUIRE(traj.completed);

    const DriftProvider zero_drift = [](const TrajectoryPoint&, const QuadratureGrid& g) {
        return std::vector<double>(g.size(), 0.0);
    };
    SimulationParams params;
    params.n_paths = 100000;
    params.dt = 1e-2;
    params.seed = 7;
    const auto ens = simulate(model, family, traj, zero_drift, params, kPolicy);
    REQUIRE(ens.terminal.size() == ens.initial.size());

    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < ens.terminal.size(); ++i) {
        const double d = ens.terminal[i] - ens.initial[i];
        s += d;
        s2 += d * d;
    }
    const double n = static_cast<double>(ens.terminal.size());
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("simulate: stationary linear reconstruction keeps N(0,1)") {
    const auto model = linear_model(-1.0, 2.0);
    const auto family = ExponentialFamily::polynomial(2);
    const auto traj = constant_trajectory(model, family, gaussian_theta(0.0, 1.0), 0.5, 1e-2);
    REQUIRE(traj.completed);

    SimulationParams params;
    params.n_paths = 50000;
    params.dt = 1e-2;
    params.seed = 11;
    const auto ens =
        simulate(model, family, traj, ustar_drift(model, family), params, kPolicy);

    double s = 0.0, s2 = 0.0;
    for (double y : ens.terminal) {
        s += y;
        s2 += y * y;
    }
    const double n = static_cast<double>(ens.terminal.size());
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));

    // desk-scale consistency with the projected terminal density
    const auto p_t = density_values(family, traj.back().theta, ens.terminal_grid);
    const auto d = empirical_distance(ens.histogram, ens.terminal_grid, p_t);
    CHECK(d.l1 < 0.05);
}

TEST_CASE("simulate: identical seeds reproduce the ensemble bit for bit") {
    const auto model = linear_model(-1.0, 2.0);
    const auto family = ExponentialFamily::polynomial(2);
    const auto traj = constant_trajectory(model, family, gaussian_theta(0.0, 1.0), 0.1, 1e-2);
    SimulationParams params;
    params.n_paths = 2000;
    params.dt = 1e-2;
    params.seed = 123;
    const auto drift = ustar_drift(model, family);
    const auto a = simulate(model, family, traj, drift, params, kPolicy);
    const auto b = simulate(model, family, traj, drift, params, kPolicy);
    REQUIRE(a.terminal.size() == b.terminal.size());
    for (std::size_t i = 0; i < a.terminal.size(); ++i)
        CHECK(a.terminal[i] == b.terminal[i]);
    CHECK(a.histogram.counts == b.histogram.counts);

    params.seed = 124;
    const auto c = simulate(model, family, traj, drift, params, kPolicy);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.terminal.size() && i < c.terminal.size(); ++i)
        any_diff = any_diff || a.terminal[i] != c.terminal[i];
    CHECK(any_diff);
}

TEST_CASE("simulate: runaway drift trips the exclusion budget") {
    const auto model = linear_model(0.0, 1.0);
    const auto family = ExponentialFamily::polynomial(2);
    const auto traj = constant_trajectory(model, family, gaussian_theta(0.0, 1.0), 0.1, 1e-2);
    const DriftProvider runaway = [](const TrajectoryPoint&, const QuadratureGrid& g) {
        return std::vector<double>(g.size(), 1e6);
    };
    SimulationParams params;
    params.n_paths = 1000;
    params.dt = 1e-2;
    params.seed = 5;
    CHECK_THROWS_AS((void)simulate(model, family, traj, runaway, params, kPolicy),
                    NumericalError);
}

TEST_CASE("simulate: rejects a simulation step above the trajectory step") {
    const auto model = linear_model(-1.0, 2.0);
    const auto family = ExponentialFamily::polynomial(2);
    const auto traj = constant_trajectory(model, family, gaussian_theta(0.0, 1.0), 0.1, 1e-2);
    SimulationParams params;
    params.n_paths = 10;
    params.dt = 0.02; // above h = 0.01
    params.seed = 5;
    CHECK_THROWS_AS((void)simulate(model, family, traj, ustar_drift(model, family), params,
                                   kPolicy),
                    UsageError);
}

TEST_CASE("simulate: one path is degenerate but legal") {
    const auto model = linear_model(-1.0, 2.0);
    const auto family = ExponentialFamily::polynomial(2);
    const auto traj = constant_trajectory(model, family, gaussian_theta(0.0, 1.0), 0.1, 1e-2);
    SimulationParams params;
    params.n_paths = 1;
    params.dt = 1e-2;
    params.seed = 9;
    const auto ens =
        simulate(model, family, traj, ustar_drift(model, family), params, kPolicy);
    CHECK(ens.terminal.size() == 1);
    CHECK(ens.histogram.n_kept == 1);
    const auto p_t = density_values(family, traj.back().theta, ens.terminal_grid);
    const auto d = empirical_distance(ens.histogram, ens.terminal_grid, p_t);
    CHECK(d.l1 <= 2.0);
}

TEST_CASE("empirical_distance: exact bin masses give zero distance") {
    const auto grid = QuadratureGrid::gauss_legendre(-12.0, 12.0, 64, 16);
    const auto p = gaussian_density(grid, 0.0, 1.0);
    const auto cdf = grid.cumulative_integral(p);

    Histogram hist;
    hist.lo = grid.x_min();
    hist.hi = grid.x_max();
    const int bins = 200;
    hist.counts.assign(bins, 0);
    const double width = hist.bin_width();
    const long big = 100000000;
    auto cdf_at = [&](double xq) {
        const auto& x = grid.nodes();
        if (xq <= x.front()) return 0.0;
        if (xq >= x.back()) return cdf.back();
        const auto it = std::upper_bound(x.begin(), x.end(), xq);
        const std::size_t i = static_cast<std::size_t>(it - x.begin());
        const double f = (xq - x[i - 1]) / (x[i] - x[i - 1]);
        return cdf[i - 1] + f * (cdf[i] - cdf[i - 1]);
    };
    for (int b = 0; b < bins; ++b) {
        const double lo = hist.lo + width * b;
        const double hi = lo + width;
        hist.counts[static_cast<std::size_t>(b)] =
            std::lround((cdf_at(hi) - cdf_at(lo)) * static_cast<double>(big));
        hist.n_kept += hist.counts[static_cast<std::size_t>(b)];
    }
    const auto d = empirical_distance(hist, grid, p);
    CHECK(d.l1 < 1e-3);
    CHECK(d.hellinger < 1e-3);
}

TEST_CASE("empirical_distance: binned Gaussians against the erf-binned oracle") {
    // N(0,1) empirical masses vs N(0,2) density. Binning contracts the
    // continuous Hellinger distance (0.1703422) to 0.1701998 at 200 bins
    // over [-12,12]; the oracle below recomputes that from erf masses.
    const auto grid = QuadratureGrid::gauss_legendre(-12.0, 12.0, 64, 16);
    const auto pb = gaussian_density(grid, 0.0, 2.0);
    Histogram hist;
    hist.lo = grid.x_min();
    hist.hi = grid.x_max();
    hist.counts.assign(200, 0);
    const double width = hist.bin_width();
    auto gauss_mass = [&](double lo, double hi, double sd) {
        return 0.5 * (std::erf(hi / (sd * std::sqrt(2.0))) -
                      std::erf(lo / (sd * std::sqrt(2.0))));
    };
    double h2_oracle = 0.0;
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
        const double lo = hist.lo + width * static_cast<double>(b);
        const double ma = gauss_mass(lo, lo + width, 1.0);
        const double mb = gauss_mass(lo, lo + width, std::sqrt(2.0));
        hist.counts[b] = std::lround(ma * 1e9);
        hist.n_kept += hist.counts[b];
        const double ds = std::sqrt(ma) - std::sqrt(mb);
        h2_oracle += ds * ds;
    }
    const double oracle = std::sqrt(0.5 * h2_oracle);
    CHECK(oracle == doctest::Approx(0.1701998347).epsilon(1e-6));
    const auto d = empirical_distance(hist, grid, pb);
    CHECK(std::abs(d.hellinger - oracle) < 5e-5);
    CHECK(std::abs(d.hellinger - 0.1703421750047625) < 5e-4);
}

TEST_CASE("empirical_distance: disjoint supports saturate the L1 bound") {
    const auto grid = QuadratureGrid::trapezoid(-10.0, 10.0, 2001);
    // density supported on (0, 10]
    std::vector<double> p(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (grid.nodes()[i] > 0.0) p[i] = 0.1;
    Histogram hist;
    hist.lo = -10.0;
    hist.hi = 10.0;
    hist.counts.assign(200, 0);
    // all samples in the left half
    for (std::size_t b = 0; b < 100; ++b) hist.counts[b] = 10;
    hist.n_kept = 1000;
    const auto d = empirical_distance(hist, grid, p);
    CHECK(d.l1 == doctest::Approx(2.0).epsilon(1e-2));
}

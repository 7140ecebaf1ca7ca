#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "projfpe/errors.hpp"
#include "projfpe/geometry.hpp"
#include "projfpe/oracle.hpp"
#include "projfpe/rng.hpp"

#include <cmath>
#include <vector>

using namespace projfpe;

namespace {

QuadratureGrid wide_grid() { return QuadratureGrid::gauss_legendre(-14.0, 14.0, 64, 16); }

std::vector<double> centered(const QuadratureGrid& g, std::span<const double> p,
                             std::vector<double> u) {
    double mean = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) mean += g.weights()[i] * p[i] * u[i];
    for (double& v : u) v -= mean;
    return u;
}

} // namespace

TEST_CASE("chart: identity, Gaussian shift, Gaussian scale") {
    const auto g = wide_grid();
    const auto p = gaussian_density(g, 0.0, 1.0);
    {
        const auto u = chart(g, p, p);
        for (double v : u) CHECK(std::abs(v) < 1e-13);
    }
    {
        const auto q = gaussian_density(g, 1.0, 1.0);
        const auto u = chart(g, p, q);
        for (std::size_t i = 0; i < g.size(); ++i)
            CHECK(u[i] == doctest::Approx(g.nodes()[i]).epsilon(1e-10));
    }
    {
        // oracle: log(N(0,2)/N(0,1)) = x^2/4 - log(2)/2, centered -> (x^2 - 1)/4
        const auto q = gaussian_density(g, 0.0, 2.0);
        const auto u = chart(g, p, q);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = g.nodes()[i];
            CHECK(u[i] == doctest::Approx(0.25 * (x * x - 1.0)).epsilon(1e-9));
        }
    }
}

TEST_CASE("chart: nonpositive density is a domain error") {
    const auto g = QuadratureGrid::trapezoid(-1.0, 1.0, 5);
    std::vector<double> p(g.size(), 0.25);
    std::vector<double> q(g.size(), 0.25);
    q[2] = 0.0;
    CHECK_THROWS_AS((void)chart(g, p, q), DomainError);
}

TEST_CASE("cumulant: zero direction, Gaussian mgf, patch renormalization") {
    const auto g = wide_grid();
    const auto p = gaussian_density(g, 0.0, 1.0);
    CHECK(cumulant(g, p, std::vector<double>(g.size(), 0.0)) == doctest::Approx(0.0));

    // oracle: log E exp(t x) = t^2/2 under N(0,1)
    for (double t : {1.0, 0.3, -0.8}) {
        std::vector<double> u(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) u[i] = t * g.nodes()[i];
        CHECK(cumulant(g, p, u) == doctest::Approx(0.5 * t * t).epsilon(1e-11));
    }

    // K_p is zero only at u = 0, positive elsewhere
    std::vector<double> u = centered(g, p, [&] {
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) v[i] = 0.3 * std::sin(g.nodes()[i]);
        return v;
    }());
    CHECK(cumulant(g, p, u) > 0.0);

    const auto q = patch(g, p, u);
    CHECK(g.integrate(q) == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("orlicz_norm: closed form for a linear score and homogeneity") {
    const auto g = wide_grid();
    const auto p = gaussian_density(g, 0.0, 1.0);
    CHECK(orlicz_norm(g, p, std::vector<double>(g.size(), 0.0)) == 0.0);

    // oracle: E cosh(x/r) = exp(1/(2r^2)) = 2 at r = 1/sqrt(2 ln 2)
    std::vector<double> u(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = g.nodes()[i];
    const double r = orlicz_norm(g, p, u);
    CHECK(r == doctest::Approx(1.0 / std::sqrt(2.0 * std::log(2.0))).epsilon(1e-7));

    std::vector<double> u2(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) u2[i] = 2.0 * g.nodes()[i];
    CHECK(orlicz_norm(g, p, u2) == doctest::Approx(2.0 * r).epsilon(1e-7));
}

TEST_CASE("orlicz_norm: values beyond any admissible radius report infinity") {
    const auto g = wide_grid();
    const auto p = gaussian_density(g, 0.0, 1.0);
    // |u|/r > 700 even at r = 1e8: cosh overflows for every bracket radius
    std::vector<double> u(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = 1e12 * g.nodes()[i];
    CHECK(std::isinf(orlicz_norm(g, p, u)));
}

TEST_CASE("orlicz_norm: ball property implies E exp(u) < 4") {
    // rescaling to norm < 1 can leave a quadratic component close to the
    // integrability edge (coefficient up to ~0.475), so the window must be
    // wide; directions grow at most quadratically to stay in the Cramer class
    const auto g = QuadratureGrid::gauss_legendre(-36.0, 36.0, 128, 16);
    const auto p = gaussian_density(g, 0.0, 1.0);
    const auto& x = g.nodes();
    NormalStream rng(99, 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> u(g.size());
        const double c1 = rng.normal(), c2 = rng.normal(), c3 = rng.normal();
        for (std::size_t i = 0; i < g.size(); ++i)
            u[i] = c1 * x[i] + 0.3 * c2 * (x[i] * x[i] - 1.0) +
                   c3 * std::sin(2.0 * x[i]);
        u = centered(g, p, std::move(u));
        const double norm = orlicz_norm(g, p, u);
        if (!(norm > 0.0) || !std::isfinite(norm)) continue;
        const double target = 0.05 + 0.9 * rng.uniform();
        for (double& v : u) v *= target / norm;
        CHECK(std::exp(cumulant(g, p, u)) < 4.0);
    }
}

TEST_CASE("chart/patch roundtrip inside the unit ball") {
    const auto g = wide_grid();
    const auto p = gaussian_density(g, 0.0, 1.0);
    const auto& x = g.nodes();
    NormalStream rng(7, 3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> u(g.size());
        const double c1 = rng.normal(), c2 = rng.normal();
        for (std::size_t i = 0; i < g.size(); ++i)
            u[i] = c1 * x[i] + 0.2 * c2 * (x[i] * x[i] - 1.0);
        u = centered(g, p, std::move(u));
        const double norm = orlicz_norm(g, p, u);
        if (!(norm > 0.0) || !std::isfinite(norm)) continue;
        const double target = 0.9 * rng.uniform() + 0.05;
        // keep the quadratic component clear of the integrability edge so
        // e^{u-K} p neither underflows nor leaks mass past the window;
        // the scaled u stays inside the unit ball either way
        double scale = target / norm;
        const double quad = 0.2 * c2 * scale;
        if (std::abs(quad) > 0.3) scale *= 0.3 / std::abs(quad);
        for (double& v : u) v *= scale;

        const auto q = patch(g, p, u);
        const auto back = chart(g, p, q);
        double sup = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            sup = std::max(sup, std::abs(back[i] - u[i]));
        CHECK(sup < 1e-8);
    }
}

TEST_CASE("change of coordinates between Gaussian base points") {
    const auto g = wide_grid();
    const auto p1 = gaussian_density(g, 0.5, 1.0);
    const auto p2 = gaussian_density(g, -0.3, 1.4);
    std::vector<double> u(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = 0.2 * g.nodes()[i];
    u = centered(g, p1, std::move(u));

    const auto q = patch(g, p1, u);
    const auto lhs = chart(g, p2, q);

    std::vector<double> rhs(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        rhs[i] = u[i] + std::log(p1[i] / p2[i]);
    rhs = centered(g, p2, std::move(rhs));

    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(std::abs(lhs[i] - rhs[i]) < 1e-9);
}

TEST_CASE("cumulant differentials match the moments of the patched density") {
    const auto g = wide_grid();
    const auto p = gaussian_density(g, 0.0, 1.0);
    const auto& x = g.nodes();

    std::vector<double> u(g.size()), v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        u[i] = 0.25 * x[i];
        v[i] = x[i] * x[i] - 0.5 * x[i];
    }
    u = centered(g, p, std::move(u));

    const auto q = patch(g, p, u);
    double eqv = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) eqv += g.weights()[i] * q[i] * v[i];
    double var = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = v[i] - eqv;
        var += g.weights()[i] * q[i] * d * d;
    }

    const double eps = 1e-4;
    std::vector<double> up(g.size()), um(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        up[i] = u[i] + eps * v[i];
        um[i] = u[i] - eps * v[i];
    }
    const double k0 = cumulant(g, p, u);
    const double kp = cumulant(g, p, up);
    const double km = cumulant(g, p, um);
    CHECK(std::abs((kp - km) / (2.0 * eps) - eqv) / std::abs(eqv) < 1e-5);
    CHECK(std::abs((kp - 2.0 * k0 + km) / (eps * eps) - var) / var < 1e-5);
}

TEST_CASE("sqrt_map_derivative_check: identities at and away from the origin") {
    const auto g = wide_grid();
    const auto p = gaussian_density(g, 0.0, 1.0);
    const auto& x = g.nodes();
    std::vector<double> zero(g.size(), 0.0), v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = x[i];

    const auto at0 = sqrt_map_derivative_check(g, p, zero, v, 1e-4);
    CHECK(at0.fd_rel_error < 1e-5);
    CHECK(at0.dh_norm_sq == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(at0.quarter_second_cumulant == doctest::Approx(0.25).epsilon(1e-10));

    std::vector<double> u(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) u[i] = 0.15 * (x[i] * x[i] - 1.0);
    u = centered(g, p, std::move(u));
    const auto away = sqrt_map_derivative_check(g, p, u, v, 1e-4);
    CHECK(away.fd_rel_error < 1e-5);
    CHECK(away.norm_rel_mismatch < 1e-5);

    // zero direction gives a zero derivative
    const auto null_dir = sqrt_map_derivative_check(g, p, zero, zero, 1e-4);
    CHECK(null_dir.dh_norm_sq == doctest::Approx(0.0));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "projfpe/errors.hpp"
#include "projfpe/linalg.hpp"
#include "projfpe/ode.hpp"
#include "projfpe/quadrature.hpp"
#include "projfpe/rng.hpp"

#include <cmath>
#include <vector>

using namespace projfpe;

namespace {

std::vector<double> eval_on(const QuadratureGrid& g, double (*f)(double)) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g.nodes()[i]);
    return v;
}

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

} // namespace

TEST_CASE("integrate: constants and polynomial exactness") {
    const auto g = QuadratureGrid::gauss_legendre(0.0, 1.0, 4, 8);
    CHECK(g.integrate(std::vector<double>(g.size(), 1.0)) == doctest::Approx(1.0).epsilon(1e-14));

    const auto g2 = QuadratureGrid::gauss_legendre(-1.0, 1.0, 4, 8);
    const auto x2 = eval_on(g2, [](double x) { return x * x; });
    CHECK(g2.integrate(x2) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));

    // degree 2n-1 per panel is integrated exactly
    const auto g3 = QuadratureGrid::gauss_legendre(-1.0, 1.0, 2, 6);
    const auto x11 = eval_on(g3, [](double x) { return std::pow(x, 11.0) + std::pow(x, 10.0); });
    CHECK(g3.integrate(x11) == doctest::Approx(2.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("integrate: Gaussian mass against the closed form") {
    // oracle: integral of the standard normal over [-12,12] = erf(12/sqrt(2))
    const double oracle = std::erf(12.0 / std::sqrt(2.0));
    const auto g = QuadratureGrid::gauss_legendre(-12.0, 12.0, 64, 16);
    const auto p = eval_on(g, std_normal_pdf);
    CHECK(std::abs(g.integrate(p) - oracle) < 1e-13);
    CHECK(std::abs(g.integrate(p) - 1.0) < 1e-12);
}

TEST_CASE("integrate: linearity and trapezoid weight sum") {
    const auto g = QuadratureGrid::trapezoid(-3.0, 5.0, 101);
    double wsum = 0.0;
    for (double w : g.weights()) wsum += w;
    CHECK(wsum == doctest::Approx(8.0).epsilon(1e-14));

    const auto a = eval_on(g, [](double x) { return std::sin(x); });
    const auto b = eval_on(g, [](double x) { return x * x; });
    std::vector<double> combo(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) combo[i] = 2.0 * a[i] - 3.0 * b[i];
    CHECK(g.integrate(combo) ==
          doctest::Approx(2.0 * g.integrate(a) - 3.0 * g.integrate(b)).epsilon(1e-13));
}

TEST_CASE("integrate: length mismatch is a usage error") {
    const auto g = QuadratureGrid::trapezoid(0.0, 1.0, 11);
    CHECK_THROWS_AS((void)g.integrate(std::vector<double>(7, 1.0)), UsageError);
    CHECK_THROWS_AS((void)g.cumulative_integral(std::vector<double>(7, 1.0)), UsageError);
}

TEST_CASE("cumulative_integral: prefix values on the trapezoid scheme") {
    const auto g = QuadratureGrid::trapezoid(0.0, 1.0, 3); // nodes 0, 0.5, 1
    {
        const std::vector<double> ones(3, 1.0);
        const auto c = g.cumulative_integral(ones);
        CHECK(c[0] == 0.0);
        CHECK(c[1] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(c[2] == doctest::Approx(g.integrate(ones)).epsilon(1e-15));
    }
    {
        const auto v = eval_on(g, [](double y) { return 2.0 * y; });
        const auto c = g.cumulative_integral(v);
        CHECK(c[2] == doctest::Approx(1.0).epsilon(1e-14)); // antiderivative y^2
    }
}

TEST_CASE("cumulative_integral: Gaussian half mass and erf oracle") {
    const auto g = QuadratureGrid::trapezoid(-12.0, 12.0, 4801); // node exactly at 0
    const auto p = eval_on(g, std_normal_pdf);
    const auto c = g.cumulative_integral(p);
    CHECK(std::abs(c[2400] - 0.5) < 1e-10);

    // spectral version against erf at every node
    const auto gl = QuadratureGrid::gauss_legendre(-12.0, 12.0, 64, 16);
    const auto pg = eval_on(gl, std_normal_pdf);
    const auto cg = gl.cumulative_integral(pg);
    double worst = 0.0;
    for (std::size_t i = 0; i < gl.size(); ++i) {
        const double oracle = 0.5 * (std::erf(gl.nodes()[i] / std::sqrt(2.0)) -
                                     std::erf(-12.0 / std::sqrt(2.0)));
        worst = std::max(worst, std::abs(cg[i] - oracle));
    }
    CHECK(worst < 1e-13);

    // final prefix equals the full integral
    CHECK(cg.back() == doctest::Approx(gl.integrate(pg)).epsilon(1e-12));
}

TEST_CASE("derivative_values: spectral differentiation of smooth data") {
    const auto g = QuadratureGrid::gauss_legendre(-2.0, 3.0, 16, 16);
    const auto v = eval_on(g, [](double x) { return std::sin(x); });
    const auto d = g.derivative_values(v);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        worst = std::max(worst, std::abs(d[i] - std::cos(g.nodes()[i])));
    CHECK(worst < 1e-10);
}

TEST_CASE("spd_solve: direct examples") {
    {
        Matrix id(2);
        id(0, 0) = 1.0;
        id(1, 1) = 1.0;
        const auto rep = spd_solve(id, std::vector<double>{3.0, 4.0});
        CHECK(rep.solution[0] == doctest::Approx(3.0));
        CHECK(rep.solution[1] == doctest::Approx(4.0));
    }
    {
        Matrix d(2);
        d(0, 0) = 1.0;
        d(1, 1) = 2.0;
        const auto rep = spd_solve(d, std::vector<double>{1.0, 2.0});
        CHECK(rep.solution[0] == doctest::Approx(1.0));
        CHECK(rep.solution[1] == doctest::Approx(1.0));
    }
    {
        // oracle: [[2,1],[1,2]]^-1 = (1/3) [[2,-1],[-1,2]]; rhs (3,3) -> (1,1)
        Matrix a(2);
        a(0, 0) = 2.0;
        a(0, 1) = 1.0;
        a(1, 0) = 1.0;
        a(1, 1) = 2.0;
        const auto rep = spd_solve(a, std::vector<double>{3.0, 3.0});
        CHECK(rep.solution[0] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(rep.solution[1] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(rep.min_pivot > 0.0);
        CHECK(rep.condition_estimate >= 1.0);
    }
}

TEST_CASE("spd_solve: residual bound on random SPD matrices up to size 12") {
    NormalStream rng(7, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 10.99);
        // A = B B^T + 0.1 I is SPD
        Matrix b(n), a(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) b(i, j) = rng.normal();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = i == j ? 0.1 : 0.0;
                for (std::size_t k = 0; k < n; ++k) s += b(i, k) * b(j, k);
                a(i, j) = s;
            }
        std::vector<double> rhs(n);
        for (auto& v : rhs) v = rng.normal();
        const auto rep = spd_solve(a, rhs);

        double rhs_norm = 0.0, res_norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = rhs[i];
            for (std::size_t j = 0; j < n; ++j) r -= a(i, j) * rep.solution[j];
            res_norm += r * r;
            rhs_norm += rhs[i] * rhs[i];
        }
        CHECK(std::sqrt(res_norm) <= 1e-10 * std::sqrt(rhs_norm) * rep.condition_estimate +
                                         1e-10);
    }
}

TEST_CASE("spd_solve: near-singular input raises SingularFisherError") {
    Matrix a(2);
    a(0, 0) = 1.0;
    a(0, 1) = 1.0;
    a(1, 0) = 1.0;
    a(1, 1) = 1.0 + 1e-13;
    CHECK_THROWS_AS((void)spd_solve(a, std::vector<double>{1.0, 1.0}), SingularFisherError);
}

TEST_CASE("min_eigenvalue_symmetric: known spectra") {
    Matrix a(2);
    a(0, 0) = 2.0;
    a(0, 1) = 1.0;
    a(1, 0) = 1.0;
    a(1, 1) = 2.0;
    CHECK(min_eigenvalue_symmetric(a) == doctest::Approx(1.0).epsilon(1e-12));
    Matrix d(3);
    d(0, 0) = 4.0;
    d(1, 1) = 0.25;
    d(2, 2) = 9.0;
    CHECK(min_eigenvalue_symmetric(d) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("rk4_step: plain examples") {
    const VectorField zero = [](double, const std::vector<double>& y) {
        return std::vector<double>(y.size(), 0.0);
    };
    CHECK(rk4_step(zero, 0.0, {1.0}, 0.1)[0] == 1.0);

    const VectorField identity = [](double, const std::vector<double>& y) { return y; };
    // frozen one-step value 1 + h + h^2/2 + h^3/6 + h^4/24 at h = 0.1,
    // which sits 8.5e-8 from exp(0.1)
    CHECK(std::abs(rk4_step(identity, 0.0, {1.0}, 0.1)[0] - 1.1051708333333332) < 1e-8);
    CHECK(std::abs(rk4_step(identity, 0.0, {1.0}, 0.1)[0] - std::exp(0.1)) < 1e-7);

    const VectorField constant = [](double, const std::vector<double>&) {
        return std::vector<double>{0.0, 0.5};
    };
    const auto y = rk4_step(constant, 0.0, {0.0, -0.5}, 0.2);
    CHECK(y[0] == doctest::Approx(0.0));
    CHECK(y[1] == doctest::Approx(-0.4).epsilon(1e-15));
}

TEST_CASE("rk4_step: global error on y'=y scales as h^4") {
    const VectorField identity = [](double, const std::vector<double>& y) { return y; };
    auto solve = [&](double h) {
        std::vector<double> y{1.0};
        const long n = std::lround(1.0 / h);
        for (long k = 0; k < n; ++k) y = rk4_step(identity, k * h, y, h);
        return std::abs(y[0] - std::exp(1.0));
    };
    const double e1 = solve(0.02);
    const double e2 = solve(0.01);
    CHECK(e1 / e2 > 16.0 * 0.8);
    CHECK(e1 / e2 < 16.0 * 1.2);
}

TEST_CASE("rk4_step: rejects nonpositive step") {
    const VectorField identity = [](double, const std::vector<double>& y) { return y; };
    CHECK_THROWS_AS((void)rk4_step(identity, 0.0, {1.0}, 0.0), UsageError);
}

TEST_CASE("rk4_step_with_error: halving estimate tracks the local error") {
    const VectorField identity = [](double, const std::vector<double>& y) { return y; };
    // oracle: single-step local error on y' = y is |rk4(h) - e^h|
    auto local_error = [&](double h) {
        return std::abs(rk4_step(identity, 0.0, {1.0}, h)[0] - std::exp(h));
    };
    const auto a = rk4_step_with_error(identity, 0.0, {1.0}, 0.2);
    const auto b = rk4_step_with_error(identity, 0.0, {1.0}, 0.1);
    CHECK(a.y[0] == rk4_step(identity, 0.0, {1.0}, 0.2)[0]);
    // the estimate has the size of the true local error (within the 16/15
    // Richardson factor) and scales like h^5
    CHECK(a.error_estimate == doctest::Approx(local_error(0.2)).epsilon(0.1));
    const double ratio = a.error_estimate / b.error_estimate;
    CHECK(ratio > 32.0 * 0.8);
    CHECK(ratio < 32.0 * 1.2);
}

TEST_CASE("counter rng: determinism and stream independence") {
    NormalStream a(123, 5), b(123, 5), c(123, 6);
    double first_a = a.normal();
    CHECK(first_a == b.normal());
    CHECK(first_a != c.normal());

    // moments of a modest sample
    NormalStream s(2024, 0);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = s.normal();
        sum += z;
        sum2 += z * z;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

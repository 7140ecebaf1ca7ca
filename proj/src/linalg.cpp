#include "projfpe/linalg.hpp"

#include "projfpe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace projfpe {

SpdSolveReport spd_solve(const Matrix& a, std::span<const double> rhs) {
    const std::size_t n = a.dim();
    if (rhs.size() != n) throw UsageError("spd_solve: rhs length mismatch");
    if (n == 0) return {};

    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        max_diag = std::max(max_diag, std::abs(a(i, i)));
    const double pivot_floor = 1e-10 * max_diag;

    Matrix l(n);
    double min_pivot = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        min_pivot = std::min(min_pivot, d);
        if (!(d > pivot_floor))
            throw SingularFisherError("spd_solve: pivot below 1e-10 of max diagonal");
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }

    // forward then backward substitution
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
        x[ii] = s / l(ii, ii);
    }

    double dmin = std::numeric_limits<double>::infinity();
    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dmin = std::min(dmin, l(i, i));
        dmax = std::max(dmax, l(i, i));
    }
    SpdSolveReport rep;
    rep.solution = std::move(x);
    rep.min_pivot = min_pivot;
    rep.condition_estimate = (dmax / dmin) * (dmax / dmin);
    return rep;
}

double min_eigenvalue_symmetric(const Matrix& a_in) {
    const std::size_t n = a_in.dim();
    if (n == 0) throw UsageError("min_eigenvalue_symmetric: empty matrix");
    Matrix a = a_in;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                off += a(i, j) * a(i, j);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    double m = a(0, 0);
    for (std::size_t i = 1; i < n; ++i) m = std::min(m, a(i, i));
    return m;
}

} // namespace projfpe

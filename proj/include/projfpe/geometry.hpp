#ifndef PROJFPE_GEOMETRY_HPP
#define PROJFPE_GEOMETRY_HPP

#include "projfpe/quadrature.hpp"

#include <span>
#include <vector>

namespace projfpe {

// Chart s_p(q) = log(q/p) - E_p[log(q/p)], centered under p.
// Both densities must be strictly positive on the grid.
std::vector<double> chart(const QuadratureGrid& grid, std::span<const double> p,
                          std::span<const double> q);

// Patch e_p(u) = exp(u - K_p(u)) p.
std::vector<double> patch(const QuadratureGrid& grid, std::span<const double> p,
                          std::span<const double> u);

// Cumulant generating functional K_p(u) = log E_p[exp(u)], max-shifted.
double cumulant(const QuadratureGrid& grid, std::span<const double> p,
                std::span<const double> u);

// inf { r > 0 : E_p[cosh(u/r) - 1] <= 1 } by bisection (relative width
// 1e-8). Returns 0 for u = 0 and +infinity when no r <= 1e8 works.
double orlicz_norm(const QuadratureGrid& grid, std::span<const double> p,
                   std::span<const double> u);

struct SqrtMapCheck {
    // relative L2 error of the central finite difference of
    // H(u) = sqrt(e_p(u)) against H(u) (v - E_q v)/2
    double fd_rel_error = 0.0;
    // ||DH v||_2^2 and Var_q(v)/4, which must agree
    double dh_norm_sq = 0.0;
    double quarter_second_cumulant = 0.0;
    double norm_rel_mismatch = 0.0;
};

// Derivative identities of the square-root map at u in direction v.
SqrtMapCheck sqrt_map_derivative_check(const QuadratureGrid& grid,
                                       std::span<const double> p0,
                                       std::span<const double> u,
                                       std::span<const double> v, double eps);

} // namespace projfpe

#endif

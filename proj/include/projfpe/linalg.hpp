#ifndef PROJFPE_LINALG_HPP
#define PROJFPE_LINALG_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace projfpe {

// Dense square matrix, row major. Small (family dimension) sizes only.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}

    std::size_t dim() const { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
    const std::vector<double>& data() const { return a_; }

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

struct SpdSolveReport {
    std::vector<double> solution;
    double min_pivot = 0.0;          // smallest Cholesky pivot (pre-sqrt)
    double condition_estimate = 0.0; // (max diag(L) / min diag(L))^2
};

// Solve A x = rhs for symmetric positive definite A by Cholesky.
// Throws SingularFisherError when a pivot falls below 1e-10 * max diagonal.
SpdSolveReport spd_solve(const Matrix& a, std::span<const double> rhs);

// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi).
double min_eigenvalue_symmetric(const Matrix& a);

} // namespace projfpe

#endif

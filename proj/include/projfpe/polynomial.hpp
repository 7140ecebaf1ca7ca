#ifndef PROJFPE_POLYNOMIAL_HPP
#define PROJFPE_POLYNOMIAL_HPP

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace projfpe {

// Dense univariate polynomial, coefficients in ascending degree order.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) { trim(); }

    static Polynomial monomial(int degree, double coeff = 1.0) {
        std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
        c.back() = coeff;
        return Polynomial(std::move(c));
    }

    double operator()(double x) const {
        double v = 0.0;
        for (std::size_t i = c_.size(); i-- > 0;) v = v * x + c_[i];
        return v;
    }

    Polynomial derivative() const {
        if (c_.size() <= 1) return Polynomial();
        std::vector<double> d(c_.size() - 1);
        for (std::size_t i = 1; i < c_.size(); ++i)
            d[i - 1] = static_cast<double>(i) * c_[i];
        return Polynomial(std::move(d));
    }

    // degree of the zero polynomial is -1
    int degree() const { return static_cast<int>(c_.size()) - 1; }

    double coefficient(int k) const {
        if (k < 0 || k >= static_cast<int>(c_.size())) return 0.0;
        return c_[static_cast<std::size_t>(k)];
    }

    const std::vector<double>& coefficients() const { return c_; }

    Polynomial& add_scaled(const Polynomial& other, double s) {
        if (other.c_.size() > c_.size()) c_.resize(other.c_.size(), 0.0);
        for (std::size_t i = 0; i < other.c_.size(); ++i) c_[i] += s * other.c_[i];
        trim();
        return *this;
    }

private:
    void trim() {
        while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
    }

    std::vector<double> c_;
};

} // namespace projfpe

#endif

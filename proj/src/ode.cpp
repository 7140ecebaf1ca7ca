#include "projfpe/ode.hpp"

#include "projfpe/errors.hpp"

#include <algorithm>
#include <cmath>

namespace projfpe {

std::vector<double> rk4_step(const VectorField& field, double t,
                             const std::vector<double>& y, double h) {
    if (!(h > 0.0)) throw UsageError("rk4_step: step must be positive");
    const std::size_t n = y.size();
    std::vector<double> k1 = field(t, y);
    if (k1.size() != n) throw UsageError("rk4_step: field dimension mismatch");

    std::vector<double> tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    std::vector<double> k2 = field(t + 0.5 * h, tmp);

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    std::vector<double> k3 = field(t + 0.5 * h, tmp);

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    std::vector<double> k4 = field(t + h, tmp);

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

Rk4StepResult rk4_step_with_error(const VectorField& field, double t,
                                  const std::vector<double>& y, double h) {
    Rk4StepResult res;
    res.y = rk4_step(field, t, y, h);
    const std::vector<double> half = rk4_step(field, t, y, 0.5 * h);
    const std::vector<double> two_halves = rk4_step(field, t + 0.5 * h, half, 0.5 * h);
    for (std::size_t i = 0; i < y.size(); ++i)
        res.error_estimate =
            std::max(res.error_estimate, std::abs(two_halves[i] - res.y[i]));
    return res;
}

} // namespace projfpe

#ifndef PROJFPE_ODE_HPP
#define PROJFPE_ODE_HPP

#include <functional>
#include <vector>

namespace projfpe {

using VectorField =
    std::function<std::vector<double>(double t, const std::vector<double>& y)>;

// One classical fourth-order Runge-Kutta step. Deterministic; any
// exception from the field propagates.
std::vector<double> rk4_step(const VectorField& field, double t,
                             const std::vector<double>& y, double h);

struct Rk4StepResult {
    std::vector<double> y;         // the single full step
    double error_estimate = 0.0;   // max-norm gap to two half steps, O(h^5)
};

// Full step plus a step-halving error estimate. The estimate is a
// diagnostic only; there is no adaptive controller.
Rk4StepResult rk4_step_with_error(const VectorField& field, double t,
                                  const std::vector<double>& y, double h);

} // namespace projfpe

#endif

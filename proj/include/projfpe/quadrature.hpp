#ifndef PROJFPE_QUADRATURE_HPP
#define PROJFPE_QUADRATURE_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace projfpe {

enum class GridScheme {
    GaussLegendreComposite,
    Trapezoid,
};

// Truncated spatial grid with nodes and weights. All expectations and
// inner products in the library are evaluated on one of these.
//
// The composite Gauss-Legendre scheme is exact for polynomials up to
// degree 2n-1 per panel; the trapezoid scheme (nodes include both
// endpoints) is exact for affine integrands.
class QuadratureGrid {
public:
    QuadratureGrid() = default; // empty; assign from a factory before use

    static QuadratureGrid gauss_legendre(double x_min, double x_max,
                                         int panels, int nodes_per_panel);
    static QuadratureGrid trapezoid(double x_min, double x_max, int n_nodes);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    GridScheme scheme() const { return scheme_; }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    int panels() const { return panels_; }
    int nodes_per_panel() const { return nodes_per_panel_; }

    // Sum of w_i * v_i.
    double integrate(std::span<const double> values) const;

    // Prefix integrals F(x_k) = integral of v from x_min to node k.
    // For the Gauss-Legendre scheme the per-panel interpolant is
    // integrated exactly, so F inherits the spectral accuracy of the rule.
    std::vector<double> cumulative_integral(std::span<const double> values) const;

    // d/dx of the per-panel interpolant, evaluated at the nodes.
    // Gauss-Legendre only; spectral accuracy for smooth data.
    std::vector<double> derivative_values(std::span<const double> values) const;

private:
    GridScheme scheme_ = GridScheme::Trapezoid;
    double x_min_ = 0.0;
    double x_max_ = 0.0;
    int panels_ = 0;
    int nodes_per_panel_ = 0;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

// n-point Gauss-Legendre nodes (ascending) and weights on [-1,1].
void legendre_rule(int n, std::vector<double>& nodes, std::vector<double>& weights);

} // namespace projfpe

#endif

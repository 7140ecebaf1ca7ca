#include "projfpe/quadrature.hpp"

#include "projfpe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace projfpe {

namespace {

// Legendre P_0..P_{kmax} at x.
void legendre_values(int kmax, double x, std::vector<double>& p) {
    p.resize(kmax + 1);
    p[0] = 1.0;
    if (kmax >= 1) p[1] = x;
    for (int k = 2; k <= kmax; ++k)
        p[k] = ((2 * k - 1) * x * p[k - 1] - (k - 1) * p[k - 2]) / k;
}

struct ReferenceRule {
    std::vector<double> nodes;   // ascending on [-1,1]
    std::vector<double> weights;
    // cumulative[j*n+i] = integral of the i-th Lagrange basis from -1 to node j
    std::vector<double> cumulative;
    // derivative[j*n+i] = derivative of the i-th Lagrange basis at node j
    std::vector<double> derivative;
};

ReferenceRule make_reference_rule(int n) {
    ReferenceRule r;
    legendre_rule(n, r.nodes, r.weights);

    // Expansion of the Lagrange basis in Legendre polynomials:
    //   l_i = sum_k a_{ik} P_k,  a_{ik} = (2k+1)/2 * w_i * P_k(x_i)
    // (exact because deg(l_i P_k) <= 2n-2 < 2n-1).
    std::vector<std::vector<double>> a(n);
    std::vector<double> pk;
    for (int i = 0; i < n; ++i) {
        legendre_values(n, r.nodes[i], pk);
        a[i].resize(n);
        for (int k = 0; k < n; ++k)
            a[i][k] = 0.5 * (2 * k + 1) * r.weights[i] * pk[k];
    }
    // integral of P_k from -1 to t: k=0 -> t+1, k>=1 -> (P_{k+1}-P_{k-1})/(2k+1)
    r.cumulative.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j) {
        legendre_values(n, r.nodes[j], pk);
        for (int i = 0; i < n; ++i) {
            double s = a[i][0] * (r.nodes[j] + 1.0);
            for (int k = 1; k < n; ++k)
                s += a[i][k] * (pk[k + 1] - pk[k - 1]) / (2 * k + 1);
            r.cumulative[static_cast<std::size_t>(j) * n + i] = s;
        }
    }

    // Barycentric differentiation matrix.
    std::vector<double> lam(n, 1.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
            if (k != i) lam[i] /= (r.nodes[i] - r.nodes[k]);
    r.derivative.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int j = 0; j < n; ++j) {
        double diag = 0.0;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            double d = (lam[i] / lam[j]) / (r.nodes[j] - r.nodes[i]);
            r.derivative[static_cast<std::size_t>(j) * n + i] = d;
            diag -= d;
        }
        r.derivative[static_cast<std::size_t>(j) * n + j] = diag;
    }
    return r;
}

const ReferenceRule& reference_rule(int n) {
    static std::map<int, ReferenceRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_reference_rule(n)).first;
    return it->second;
}

} // namespace

void legendre_rule(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n < 2) throw UsageError("legendre_rule: need at least 2 nodes");
    nodes.resize(n);
    weights.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Newton iteration from the Chebyshev-based initial guess.
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 64; ++iter) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        nodes[i] = -t;
        nodes[n - 1 - i] = t;
        double w = 2.0 / ((1.0 - t * t) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

QuadratureGrid QuadratureGrid::gauss_legendre(double x_min, double x_max,
                                              int panels, int nodes_per_panel) {
    if (!(x_max > x_min)) throw UsageError("gauss_legendre: x_max must exceed x_min");
    if (panels < 1 || nodes_per_panel < 2)
        throw UsageError("gauss_legendre: need panels >= 1 and nodes_per_panel >= 2");
    const ReferenceRule& ref = reference_rule(nodes_per_panel);
    QuadratureGrid g;
    g.scheme_ = GridScheme::GaussLegendreComposite;
    g.x_min_ = x_min;
    g.x_max_ = x_max;
    g.panels_ = panels;
    g.nodes_per_panel_ = nodes_per_panel;
    g.nodes_.reserve(static_cast<std::size_t>(panels) * nodes_per_panel);
    g.weights_.reserve(g.nodes_.capacity());
    const double width = (x_max - x_min) / panels;
    for (int p = 0; p < panels; ++p) {
        const double a = x_min + p * width;
        const double mid = a + 0.5 * width;
        const double hw = 0.5 * width;
        for (int i = 0; i < nodes_per_panel; ++i) {
            g.nodes_.push_back(mid + hw * ref.nodes[i]);
            g.weights_.push_back(hw * ref.weights[i]);
        }
    }
    return g;
}

QuadratureGrid QuadratureGrid::trapezoid(double x_min, double x_max, int n_nodes) {
    if (!(x_max > x_min)) throw UsageError("trapezoid: x_max must exceed x_min");
    if (n_nodes < 2) throw UsageError("trapezoid: need at least 2 nodes");
    QuadratureGrid g;
    g.scheme_ = GridScheme::Trapezoid;
    g.x_min_ = x_min;
    g.x_max_ = x_max;
    g.panels_ = n_nodes - 1;
    g.nodes_per_panel_ = 2;
    const double dx = (x_max - x_min) / (n_nodes - 1);
    g.nodes_.resize(n_nodes);
    g.weights_.assign(n_nodes, dx);
    for (int i = 0; i < n_nodes; ++i)
        g.nodes_[i] = x_min + i * dx;
    g.nodes_.back() = x_max;
    g.weights_.front() = 0.5 * dx;
    g.weights_.back() = 0.5 * dx;
    return g;
}

double QuadratureGrid::integrate(std::span<const double> values) const {
    if (values.size() != nodes_.size())
        throw UsageError("integrate: values/nodes length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        s += weights_[i] * values[i];
    return s;
}

std::vector<double> QuadratureGrid::cumulative_integral(std::span<const double> values) const {
    if (values.size() != nodes_.size())
        throw UsageError("cumulative_integral: values/nodes length mismatch");
    std::vector<double> out(values.size());
    if (scheme_ == GridScheme::Trapezoid) {
        out[0] = 0.0;
        for (std::size_t i = 1; i < values.size(); ++i) {
            const double dx = nodes_[i] - nodes_[i - 1];
            out[i] = out[i - 1] + 0.5 * dx * (values[i - 1] + values[i]);
        }
        return out;
    }
    const int n = nodes_per_panel_;
    const ReferenceRule& ref = reference_rule(n);
    const double hw = 0.5 * (x_max_ - x_min_) / panels_;
    double prefix = 0.0;
    for (int p = 0; p < panels_; ++p) {
        const double* v = values.data() + static_cast<std::size_t>(p) * n;
        double* o = out.data() + static_cast<std::size_t>(p) * n;
        double panel_total = 0.0;
        for (int j = 0; j < n; ++j) {
            const double* row = ref.cumulative.data() + static_cast<std::size_t>(j) * n;
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += row[i] * v[i];
            o[j] = prefix + hw * s;
            panel_total += ref.weights[j] * v[j];
        }
        prefix += hw * panel_total;
    }
    return out;
}

std::vector<double> QuadratureGrid::derivative_values(std::span<const double> values) const {
    if (values.size() != nodes_.size())
        throw UsageError("derivative_values: values/nodes length mismatch");
    if (scheme_ != GridScheme::GaussLegendreComposite)
        throw UsageError("derivative_values: Gauss-Legendre grids only");
    const int n = nodes_per_panel_;
    const ReferenceRule& ref = reference_rule(n);
    const double hw = 0.5 * (x_max_ - x_min_) / panels_;
    std::vector<double> out(values.size());
    for (int p = 0; p < panels_; ++p) {
        const double* v = values.data() + static_cast<std::size_t>(p) * n;
        double* o = out.data() + static_cast<std::size_t>(p) * n;
        for (int j = 0; j < n; ++j) {
            const double* row = ref.derivative.data() + static_cast<std::size_t>(j) * n;
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += row[i] * v[i];
            o[j] = s / hw;
        }
    }
    return out;
}

} // namespace projfpe

#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

namespace urllc::numerics {

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Gaussian tail probability Q(x) = Pr{N(0,1) > x}, computed as erfc(x/sqrt2)/2.
/// Underflows gracefully to 0 for x beyond ~38.
double q_func(double x);

/// Inverse of q_func. Throws DomainError unless 0 < p < 1.
double q_func_inv(double p);

/// Nodes and weights of a Gauss rule normalized so the weights sum to 1, i.e.
/// the rule integrates against a probability density.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t order() const { return nodes.size(); }

    template <typename F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
};

/// Generalized Gauss-Laguerre rule for the Gamma(alpha + 1, 1) density
/// (weight x^alpha e^-x, normalized). Built once per (order, alpha) and cached.
/// Trailing nodes whose weight underflows to zero are dropped, so very high
/// orders may return slightly fewer than `order` nodes.
std::shared_ptr<const QuadratureRule> gauss_laguerre(std::size_t order, double alpha);

struct GammaExpectation {
    double value;      // result at the requested order
    double refined;    // result at twice the order
    bool converged;    // |value - refined| <= 1e-6 * |refined|
};

inline constexpr std::size_t kDefaultQuadratureOrder = 64;
inline constexpr double kConvergenceTolerance = 1e-6;

/// E[f(g)] for g ~ Gamma(shape, 1) using one cached rule, no verification.
template <typename F>
double gamma_mean(F&& f, double shape, std::size_t order = kDefaultQuadratureOrder) {
    if (!(shape > 0.0)) throw DomainError("gamma_mean: shape must be positive");
    return gauss_laguerre(order, shape - 1.0)->integrate(f);
}

/// E[f(g)] for g ~ Gamma(shape, 1), verified by re-evaluating at twice the order.
template <typename F>
GammaExpectation expect_gamma(F&& f, double shape, std::size_t order = kDefaultQuadratureOrder) {
    const double value = gamma_mean(f, shape, order);
    const double refined = gamma_mean(f, shape, 2 * order);
    const double diff = value > refined ? value - refined : refined - value;
    const double scale = refined < 0 ? -refined : refined;
    return {value, refined, diff <= kConvergenceTolerance * scale};
}

/// Wilson score interval for a binomial proportion.
struct WilsonInterval {
    double estimate;
    double lower;
    double upper;
};
WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z = 2.5758293035489004);

}  // namespace urllc::numerics

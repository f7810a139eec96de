#include "urllc/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

namespace urllc::numerics {

double q_func(double x) {
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

double q_func_inv(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("q_func_inv: probability must lie in (0,1)");
    if (p == 0.5) return 0.0;
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace {

// Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix of the
// generalized Laguerre recurrence.
QuadratureRule build_laguerre(std::size_t n, double alpha) {
    Eigen::VectorXd diag(n);
    Eigen::VectorXd sub(n > 1 ? n - 1 : 1);
    for (std::size_t i = 0; i < n; ++i) diag[i] = 2.0 * double(i) + alpha + 1.0;
    for (std::size_t i = 1; i < n; ++i) sub[i - 1] = std::sqrt(double(i) * (double(i) + alpha));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) throw std::runtime_error("gauss_laguerre: eigen solver failed");

    QuadratureRule rule;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v0 = solver.eigenvectors()(0, Eigen::Index(i));
        const double w = v0 * v0;
        if (!(w > 0.0)) continue;
        rule.nodes.push_back(solver.eigenvalues()[Eigen::Index(i)]);
        rule.weights.push_back(w);
        total += w;
    }
    for (double& w : rule.weights) w /= total;
    return rule;
}

}  // namespace

std::shared_ptr<const QuadratureRule> gauss_laguerre(std::size_t order, double alpha) {
    if (order == 0) throw DomainError("gauss_laguerre: order must be positive");
    if (!(alpha > -1.0)) throw DomainError("gauss_laguerre: alpha must exceed -1");

    static std::mutex mutex;
    static std::map<std::pair<std::size_t, double>, std::shared_ptr<const QuadratureRule>> cache;

    const std::lock_guard lock(mutex);
    auto& slot = cache[{order, alpha}];
    if (!slot) slot = std::make_shared<const QuadratureRule>(build_laguerre(order, alpha));
    return slot;
}

WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) throw DomainError("wilson_interval: no trials");
    const double n = double(trials);
    const double p = double(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {p, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace urllc::numerics

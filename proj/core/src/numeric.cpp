#include "cwp/numeric.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cwp {

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) return -std::numeric_limits<double>::infinity();
    const double top = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(top)) return top;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - top);
    return top + std::log(sum);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double top = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - top).exp();
    return p / p.sum();
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_cdf(double x, double variance) { return normal_cdf(x / std::sqrt(variance)); }

double integrate(const std::function<double(double)>& f, double lo, double hi, double rel_tol) {
    using boost::math::quadrature::gauss_kronrod;
    double error = 0.0;
    return gauss_kronrod<double, 31>::integrate(f, lo, hi, 20, rel_tol, &error);
}

double bivariate_normal_cdf(double a, double b, double rho) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (a == -inf || b == -inf) return 0.0;
    if (a == inf) return normal_cdf(b);
    if (b == inf) return normal_cdf(a);
    if (rho >= 1.0) return normal_cdf(std::min(a, b));
    if (rho <= -1.0) return std::max(0.0, normal_cdf(a) - normal_cdf(-b));
    // Plackett: d/drho Phi2 = phi2(a, b; rho); substitute r = sin(theta) to
    // remove the (1 - r^2)^{-1/2} endpoint singularity.
    const double q0 = a * a + b * b;
    auto integrand = [&](double theta) {
        const double c = std::cos(theta);
        return std::exp(-(q0 - 2.0 * a * b * std::sin(theta)) / (2.0 * c * c));
    };
    const double span = std::asin(rho);
    double correction = 0.0;
    if (span != 0.0) {
        using boost::math::quadrature::gauss_kronrod;
        double error = 0.0;
        correction = gauss_kronrod<double, 31>::integrate(integrand, 0.0, span, 25, 1e-14, &error);
    }
    return normal_cdf(a) * normal_cdf(b) + correction / (2.0 * std::numbers::pi);
}

double bivariate_normal_cdf(double x, double y, const Eigen::Matrix2d& cov) {
    const double sx = std::sqrt(cov(0, 0));
    const double sy = std::sqrt(cov(1, 1));
    const double rho = std::clamp(cov(0, 1) / (sx * sy), -1.0, 1.0);
    return bivariate_normal_cdf(x / sx, y / sy, rho);
}

LogFactorials::LogFactorials(int max) : table_(static_cast<std::size_t>(std::max(max, 0)) + 1, 0.0) {
    for (std::size_t k = 2; k < table_.size(); ++k)
        table_[k] = std::lgamma(static_cast<double>(k) + 1.0);
}

}  // namespace cwp

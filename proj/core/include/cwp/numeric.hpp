#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace cwp {

double log_sum_exp(std::span<const double> values);

// softmax of arbitrary logits, shifted by the max for stability
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

double normal_cdf(double x);
double normal_cdf(double x, double variance);

// P(X <= a, Y <= b) for standard normals with correlation rho, |rho| <= 1.
// Accurate to about 1e-13 absolute.
double bivariate_normal_cdf(double a, double b, double rho);
double bivariate_normal_cdf(double x, double y, const Eigen::Matrix2d& cov);

// Adaptive Gauss-Kronrod quadrature. Infinite limits are allowed.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 double rel_tol = 1e-12);

// log(k!) for k = 0..max, tabulated once.
class LogFactorials {
public:
    explicit LogFactorials(int max);
    double operator()(int k) const { return table_[static_cast<std::size_t>(k)]; }
    int max() const { return static_cast<int>(table_.size()) - 1; }

private:
    std::vector<double> table_;
};

}  // namespace cwp

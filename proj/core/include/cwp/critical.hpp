#pragma once

#include "cwp/model.hpp"
#include "cwp/sampler.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace cwp {

// N = n x + n^{3/4} T u + n^{1/2} V with x = (1/2, 1/(2(q-1)), ...), u = (1-q, 1, ..., 1).
struct CriticalDecomposition {
    double t = 0.0;
    Eigen::VectorXd v;  // v[0] = 0, sum v = 0
    Eigen::VectorXd direction;
    Eigen::VectorXd center;
};

CriticalDecomposition decompose(const CountVector& nu);
Eigen::VectorXd reconstruct(const CriticalDecomposition& d, int n);

// T as a function of N_1 alone.
double critical_t(int n1, int q, int n);

// Density proportional to exp(-a t^4).
class QuarticLaw {
public:
    static QuarticLaw with_coefficient(double a);
    // f_{q,T}: a = 1 / (4 E[T^4])
    static QuarticLaw from_fourth_moment(double fourth_moment);
    // g_q: a = 4 (q-1)^4 / 3
    static QuarticLaw limit(int q);

    double coefficient() const { return a_; }
    double normalization() const { return norm_; }  // by quadrature
    double normalization_closed_form() const;       // 2 Gamma(5/4) a^{-1/4}
    std::optional<double> fourth_moment_input() const { return fourth_moment_input_; }
    double fourth_moment() const { return 1.0 / (4.0 * a_); }
    double half_width() const { return half_width_; }

    double density(double t) const;
    double cdf(double t) const;
    double quantile(double p) const;

    std::span<const double> table_nodes() const { return nodes_; }
    std::span<const double> table_values() const { return table_; }

private:
    explicit QuarticLaw(double a);

    double a_;
    double norm_ = 0.0;
    double half_width_ = 0.0;
    std::optional<double> fourth_moment_input_;
    std::vector<double> nodes_;  // 0 = t_0 < ... < t_K = half_width
    std::vector<double> table_;  // integral of the density over [0, t_k]
};

// Exact mode: T = (N_1 - n/2) / ((1-q) n^{3/4}) with N_1 ~ pmf on 0..n.
double kolmogorov_t_exact(std::span<const double> n1_pmf, int q, const QuarticLaw& target);
double kolmogorov_t_samples(std::vector<double> t_values, const QuarticLaw& target);

// E[T^4] from the N_1 pmf.
double exact_t_fourth_moment(std::span<const double> n1_pmf, int q);

struct FourthMomentRow {
    int n = 0;
    double e_t4 = 0.0;
    double normalized = 0.0;  // 16 (q-1)^4 E[T^4] / 3
    double se = 0.0;          // 0 in exact mode
};

FourthMomentRow fourth_moment_exact(std::span<const double> n1_pmf, int q);
FourthMomentRow fourth_moment_samples(std::span<const double> t_values, int q, int n);

struct VCheck {
    std::size_t samples = 0;
    Eigen::MatrixXd cov_empirical;  // coordinates 2..q
    Eigen::MatrixXd cov_target;
    double var_v2 = 0.0;
    double var_v2_se = 0.0;  // batch means, 20 batches
    double corr_v2_v3 = 0.0;
    double dk_v2_empirical = 0.0;  // vs N(0, empirical Var V_2)
    double dk_v2_target = 0.0;     // vs N(0, target Var V_2)
    double max_constraint_violation = 0.0;  // max |sum_{i>=2} V_i|
};

VCheck v_gaussian_check(const CountSamples& samples);

}  // namespace cwp

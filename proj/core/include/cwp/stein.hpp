#pragma once

#include "cwp/free_energy.hpp"
#include "cwp/model.hpp"
#include "cwp/sampler.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace cwp {

// Conditional moments of Delta = W' - W given the configuration, for the pair
// "uniform site, heat-bath resample".
struct PairMoments {
    int q = 0;
    Eigen::VectorXd drift;       // E[Delta | sigma]
    Eigen::MatrixXd second;      // E[Delta Delta^T | sigma]
    std::vector<double> third_abs;  // E|Delta_i Delta_j Delta_k|, q^3 row-major

    double third(int i, int j, int k) const {
        return third_abs[static_cast<std::size_t>((i * q + j) * q + k)];
    }
};

// Exact one-step sums over sites; depends on sigma only through its counts, so
// sites are grouped by color. Moves leaving the region (if any) count as rejected.
PairMoments pair_moments_exact(const ModelParams& params, std::span<const int> counts,
                               const std::optional<ConditionedRegion>& region = std::nullopt);

// R = E[W' - W | sigma] + Lambda W.
Eigen::VectorXd regression_residual(const ModelParams& params, std::span<const int> counts,
                                    const RegressionMatrix& lambda, const Eigen::VectorXd& center,
                                    const std::optional<ConditionedRegion>& region = std::nullopt);

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct SteinSample {
    PairMoments moments;
    Eigen::VectorXd w;
    Eigen::VectorXd residual;
};

std::vector<SteinSample> stein_samples(const ModelParams& params, const CountSamples& samples,
                                       const RegressionMatrix& lambda, const Eigen::VectorXd& center,
                                       const std::optional<ConditionedRegion>& region = std::nullopt);

struct BoundTerms {
    int n = 0;
    std::size_t sample_size = 0;
    Eigen::VectorXd lambda_cols;
    Estimate A, B, C;
    Estimate A1, A2, A3;
    double B_ceiling = 0.0;  // sum lambda_i n^{-3/2} 2^{3/2} over (i,j,k)
};

inline constexpr std::size_t kMinBoundSamples = 1000;

// Variances are across-sample variances of the sigma-conditional moments;
// standard errors from a 50-group delete-one jackknife.
BoundTerms bound_terms(std::span<const SteinSample> samples, const RegressionMatrix& lambda);

// sup_t |F(t) - G(t)| over the jumps of the step CDF F, both sides of each jump.
double kolmogorov_step(const StepCdf& step, const std::function<double(double)>& target);

// Same for the empirical CDF of samples.
double kolmogorov_samples(std::vector<double> values, const std::function<double(double)>& target);

// W_coord = sqrt(n)(L_coord - center_coord) against N(0, variance).
double kolmogorov_exact_marginal(const ExactLaw& law, const Eigen::VectorXd& center, double variance, int coord = 0);

struct QuadrantGrid {
    std::vector<double> t1;
    std::vector<double> t2;

    // points per axis spread over +-half_width marginal standard deviations
    static QuadrantGrid covering(const Eigen::Matrix2d& cov, int points, double half_width = 4.0);
};

// max over the grid of |P(W_1 <= t1, W_2 <= t2) - Phi_cov(t1, t2)|. A lower bound
// on the quadrant Kolmogorov distance.
double kolmogorov_quadrant_grid(const ExactLaw& law, const Eigen::VectorXd& center, const Eigen::Matrix2d& cov,
                                const QuadrantGrid& grid);
double kolmogorov_quadrant_grid(std::span<const Eigen::Vector2d> samples, const Eigen::Matrix2d& cov,
                                const QuadrantGrid& grid);

struct RateFit {
    std::vector<std::pair<double, double>> points;  // (n, value)
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Least squares on (log n, log value). Two points give the exact line with r^2 = 1.
RateFit rate_fit(std::span<const std::pair<double, double>> points);

}  // namespace cwp

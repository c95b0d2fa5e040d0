#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

// Colors are 0-based throughout: color 0 is the one favoured by the field h.

namespace cwp {

struct PhasePoint {
    int q = 3;
    double beta = 0.0;
    double h = 0.0;

    void validate() const;  // throws ConfigError
};

struct ModelParams {
    int q = 3;
    double beta = 0.0;
    double h = 0.0;
    int n = 1;

    void validate() const;  // throws ConfigError
    PhasePoint phase() const { return {q, beta, h}; }
};

class CountVector {
public:
    explicit CountVector(std::vector<int> counts);

    int q() const { return static_cast<int>(counts_.size()); }
    int n() const { return n_; }
    int operator[](int color) const { return counts_[static_cast<std::size_t>(color)]; }
    std::span<const int> counts() const { return counts_; }
    Eigen::VectorXd proportions() const;

private:
    std::vector<int> counts_;
    int n_ = 0;
};

class SpinConfiguration {
public:
    SpinConfiguration(int q, std::vector<int> spins);

    int q() const { return q_; }
    int n() const { return static_cast<int>(spins_.size()); }
    int spin(int site) const { return spins_[static_cast<std::size_t>(site)]; }
    std::span<const int> spins() const { return spins_; }
    void set(int site, int color);

    CountVector tally() const;
    double m(int color) const;
    double m_leave_one_out(int color, int site) const;

private:
    int q_;
    std::vector<int> spins_;
};

// Unnormalized log-weight of the count vector nu:
// log multinomial(n; nu) + (beta / 2n) |nu|^2 + h nu_0.
double log_weight(const CountVector& nu, const ModelParams& params);

// Number of compositions of n into q non-negative parts, saturating at UINT64_MAX.
std::uint64_t composition_count(int n, int q);

inline constexpr std::uint64_t kEnumerationBudget = 100'000'000;

// Visits every composition of n into q parts in colexicographic order: the last
// coordinate is the most significant, so (n,0,...,0) comes first and (0,...,0,n) last.
void for_each_composition(int n, int q, const std::function<void(std::span<const int>)>& visit);

class ExactLaw {
public:
    const ModelParams& params() const { return params_; }
    int q() const { return params_.q; }
    int n() const { return params_.n; }
    std::size_t size() const { return log_probs_.size(); }

    std::span<const int> atom(std::size_t k) const {
        return {support_.data() + k * static_cast<std::size_t>(params_.q), static_cast<std::size_t>(params_.q)};
    }
    double log_prob(std::size_t k) const { return log_probs_[k]; }
    double prob(std::size_t k) const;

    // Law conditioned on the atoms accepted by keep, renormalized.
    ExactLaw restricted(const std::function<bool(std::span<const int>)>& keep) const;

    // Independent draws of atom indices (for Monte Carlo oracles).
    std::vector<std::size_t> sample(std::size_t count, std::uint64_t seed) const;

private:
    friend ExactLaw exact_law(const ModelParams& params, unsigned threads);
    ModelParams params_;
    std::vector<int> support_;  // size() * q, row-major
    std::vector<double> log_probs_;
};

// Throws CapacityError above kEnumerationBudget compositions. Output does not depend
// on the number of threads.
ExactLaw exact_law(const ModelParams& params, unsigned threads = 1);

// Right-continuous step CDF with jumps at x (ascending), jump sizes mass.
struct StepCdf {
    std::vector<double> x;
    std::vector<double> mass;
    std::vector<double> cdf;  // cdf[k] = P(X <= x[k])

    double operator()(double t) const;
};

// CDF of (N_coord - n * center) / scale.
StepCdf exact_marginal_cdf(const ExactLaw& law, int coord, double center, double scale);

// pmf of N_coord on 0..n.
std::vector<double> marginal_pmf(const ExactLaw& law, int coord);

// Same as marginal_pmf(exact_law(params), 0) but streams over compositions without
// materializing them; usable for n in the thousands at q = 3.
std::vector<double> streamed_first_marginal(const ModelParams& params);

// StepCdf from a pmf on 0..n of a count N: atoms at (k - n * center) / scale.
StepCdf step_cdf_from_pmf(std::span<const double> pmf, double center, double scale);

// E[prod_i W_i^{powers_i}] with W = (N - n * center) / scale.
double exact_moment(const ExactLaw& law, std::span<const int> powers, const Eigen::VectorXd& center,
                    double scale);

// E[W W^T] with W = sqrt(n) (L_n - center).
Eigen::MatrixXd exact_second_moment(const ExactLaw& law, const Eigen::VectorXd& center);

// E[L_n].
Eigen::VectorXd exact_mean_proportions(const ExactLaw& law);

// CSV: nu_1..nu_q,log_prob in enumeration order.
void write_csv(std::ostream& out, const ExactLaw& law);

// Count vector summing to n closest to n * x (largest-remainder rounding).
CountVector nearest_counts(const Eigen::VectorXd& x, int n);

}  // namespace cwp

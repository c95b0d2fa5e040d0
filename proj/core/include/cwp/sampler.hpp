#pragma once

#include "cwp/free_energy.hpp"
#include "cwp/model.hpp"
#include "cwp/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace cwp {

// Euclidean ball {L_n : |L_n - center| <= epsilon}.
struct ConditionedRegion {
    Eigen::VectorXd center;
    double epsilon = 0.0;

    bool contains(std::span<const int> counts, int n) const;
};

// Ball around classification.minimizers[index]; epsilon must be below half the
// smallest distance between distinct global minimizers.
ConditionedRegion make_region(const PhaseClassification& classification, std::size_t index, double epsilon);

struct PairSample {
    Eigen::VectorXd w;
    Eigen::VectorXd w_prime;
    int site = 0;
    int old_color = 0;
    int new_color = 0;
};

// Heat-bath (Gibbs) chain on spin configurations with incrementally maintained
// counts. With a region, moves leaving it are rejected.
class GibbsChain {
public:
    GibbsChain(const ModelParams& params, const CountVector& start, std::uint64_t seed, std::uint64_t stream = 0,
               std::optional<ConditionedRegion> region = std::nullopt);

    const ModelParams& params() const { return params_; }
    const SpinConfiguration& config() const { return config_; }
    std::span<const int> counts() const { return counts_; }
    long sweep_count() const { return sweep_count_; }
    const std::optional<ConditionedRegion>& region() const { return region_; }

    // P(sigma_site = i | rest) proportional to exp(beta m_{i,site} + h [i == 0]).
    void heat_bath_probs(int site, std::span<double> out) const;
    std::vector<double> heat_bath_probs(int site) const;

    // One systematic-scan pass over all sites.
    void sweep();

    // Uniform site, heat-bath resample; the chain moves to the new state.
    PairSample exchangeable_step(const Eigen::VectorXd& center);

    // Replace the configuration (used by enumeration tests).
    void reset(const SpinConfiguration& config);

    Eigen::VectorXd fluctuation(const Eigen::VectorXd& center) const;

    // true when counts equal a fresh tally of the configuration
    bool counts_consistent() const;

private:
    // returns the color actually adopted at site
    int resample(int site);

    ModelParams params_;
    SpinConfiguration config_;
    std::vector<int> counts_;
    Rng rng_;
    std::optional<ConditionedRegion> region_;
    std::vector<double> interaction_;  // exp(beta (c - n) / n), c = 0..n
    double field_factor_ = 1.0;
    long sweep_count_ = 0;
    std::vector<double> scratch_;
};

// Spins laid out color by color from a count vector.
SpinConfiguration configuration_from_counts(const CountVector& counts);

struct SamplingPlan {
    std::size_t samples_per_chain = 1000;
    long burn_in = 1000;  // sweeps
    long thinning = 1;    // sweeps between samples
    int chains = 1;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

// Count vectors recorded along the chains, merged in chain order.
struct CountSamples {
    int q = 0;
    int n = 0;
    std::vector<int> counts;  // size() * q
    std::vector<long> sweep;
    std::vector<int> chain;

    std::size_t size() const { return sweep.size(); }
    std::span<const int> at(std::size_t k) const {
        return {counts.data() + k * static_cast<std::size_t>(q), static_cast<std::size_t>(q)};
    }
};

// Runs plan.chains independent chains from nearest_counts(start, n); chain c uses
// stream c of plan.seed. Output is identical for any thread count.
CountSamples sample_counts(const ModelParams& params, const Eigen::VectorXd& start, const SamplingPlan& plan,
                           const std::optional<ConditionedRegion>& region = std::nullopt);

// W = sqrt(n) (L_n - center) for every sample, one row per sample.
Eigen::MatrixXd fluctuations(const CountSamples& samples, const Eigen::VectorXd& center);

CountSamples sample_fluctuations(const ModelParams& params, const Eigen::VectorXd& center, const SamplingPlan& plan);
CountSamples conditioned_sample(const ModelParams& params, const ConditionedRegion& region, const SamplingPlan& plan);

// CSV: chain,sweep,W_1..W_q
void write_csv(std::ostream& out, const CountSamples& samples, const Eigen::VectorXd& center);

}  // namespace cwp

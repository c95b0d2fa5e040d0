#include "cwp/sampler.hpp"

#include "cwp/error.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

namespace cwp {

bool ConditionedRegion::contains(std::span<const int> counts, int n) const {
    double dist2 = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double diff = static_cast<double>(counts[i]) / n - center[static_cast<Eigen::Index>(i)];
        dist2 += diff * diff;
    }
    return dist2 <= epsilon * epsilon;
}

ConditionedRegion make_region(const PhaseClassification& classification, std::size_t index, double epsilon) {
    const auto& ms = classification.minimizers;
    if (index >= ms.size()) throw ConfigError("minimizer index out of range");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    double closest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ms.size(); ++i)
        for (std::size_t j = i + 1; j < ms.size(); ++j) closest = std::min(closest, (ms[i].x - ms[j].x).norm());
    if (!(epsilon < 0.5 * closest))
        throw ConfigError("epsilon must be smaller than half the distance between global minimizers");
    return {ms[index].x, epsilon};
}

SpinConfiguration configuration_from_counts(const CountVector& counts) {
    std::vector<int> spins;
    spins.reserve(static_cast<std::size_t>(counts.n()));
    for (int color = 0; color < counts.q(); ++color) spins.insert(spins.end(), static_cast<std::size_t>(counts[color]), color);
    return SpinConfiguration(counts.q(), std::move(spins));
}

GibbsChain::GibbsChain(const ModelParams& params, const CountVector& start, std::uint64_t seed, std::uint64_t stream,
                       std::optional<ConditionedRegion> region)
    : params_(params),
      config_(configuration_from_counts(start)),
      counts_(start.counts().begin(), start.counts().end()),
      rng_(seed, stream),
      region_(std::move(region)),
      scratch_(static_cast<std::size_t>(params.q)) {
    params_.validate();
    if (start.q() != params_.q || start.n() != params_.n) throw ConfigError("start counts do not match (q, n)");
    if (region_ && !region_->contains(counts_, params_.n))
        throw ConfigError("conditioning region contains no count vector near its center");
    const int n = params_.n;
    interaction_.resize(static_cast<std::size_t>(n) + 1);
    for (int c = 0; c <= n; ++c) interaction_[static_cast<std::size_t>(c)] = std::exp(params_.beta * (c - n) / n);
    field_factor_ = std::exp(params_.h);
}

void GibbsChain::heat_bath_probs(int site, std::span<double> out) const {
    const int own = config_.spin(site);
    double total = 0.0;
    for (int i = 0; i < params_.q; ++i) {
        const int others = counts_[static_cast<std::size_t>(i)] - (i == own ? 1 : 0);
        double w = interaction_[static_cast<std::size_t>(others)];
        if (i == 0) w *= field_factor_;
        out[static_cast<std::size_t>(i)] = w;
        total += w;
    }
    for (auto& v : out) v /= total;
}

std::vector<double> GibbsChain::heat_bath_probs(int site) const {
    std::vector<double> p(static_cast<std::size_t>(params_.q));
    heat_bath_probs(site, p);
    return p;
}

int GibbsChain::resample(int site) {
    heat_bath_probs(site, scratch_);
    const double u = rng_.uniform();
    int color = params_.q - 1;
    double running = 0.0;
    for (int i = 0; i < params_.q; ++i) {
        running += scratch_[static_cast<std::size_t>(i)];
        if (u < running) {
            color = i;
            break;
        }
    }
    const int old = config_.spin(site);
    if (color == old) return old;
    --counts_[static_cast<std::size_t>(old)];
    ++counts_[static_cast<std::size_t>(color)];
    if (region_ && !region_->contains(counts_, params_.n)) {
        ++counts_[static_cast<std::size_t>(old)];
        --counts_[static_cast<std::size_t>(color)];
        return old;
    }
    config_.set(site, color);
    return color;
}

void GibbsChain::sweep() {
    for (int site = 0; site < params_.n; ++site) resample(site);
    ++sweep_count_;
    assert(counts_consistent());
}

PairSample GibbsChain::exchangeable_step(const Eigen::VectorXd& center) {
    PairSample out;
    out.w = fluctuation(center);
    out.site = static_cast<int>(rng_.below(static_cast<std::uint64_t>(params_.n)));
    out.old_color = config_.spin(out.site);
    out.new_color = resample(out.site);
    out.w_prime = fluctuation(center);
    return out;
}

void GibbsChain::reset(const SpinConfiguration& config) {
    if (config.n() != params_.n || config.q() != params_.q) throw ConfigError("configuration does not match (q, n)");
    const auto tally = config.tally();
    if (region_ && !region_->contains(tally.counts(), params_.n)) throw ConfigError("configuration outside region");
    config_ = config;
    counts_.assign(tally.counts().begin(), tally.counts().end());
}

Eigen::VectorXd GibbsChain::fluctuation(const Eigen::VectorXd& center) const {
    const double n = params_.n;
    Eigen::VectorXd w(params_.q);
    for (int i = 0; i < params_.q; ++i) w[i] = std::sqrt(n) * (counts_[static_cast<std::size_t>(i)] / n - center[i]);
    return w;
}

bool GibbsChain::counts_consistent() const {
    const auto tally = config_.tally();
    return std::equal(counts_.begin(), counts_.end(), tally.counts().begin());
}

CountSamples sample_counts(const ModelParams& params, const Eigen::VectorXd& start, const SamplingPlan& plan,
                           const std::optional<ConditionedRegion>& region) {
    params.validate();
    if (plan.chains < 1) throw ConfigError("need at least one chain");
    if (plan.thinning < 1) throw ConfigError("thinning must be at least 1");
    if (plan.burn_in < 0) throw ConfigError("burn-in must be non-negative");
    const CountVector init = nearest_counts(region ? region->center : start, params.n);

    const auto chains = static_cast<std::size_t>(plan.chains);
    const auto per_chain = plan.samples_per_chain;
    const auto q = static_cast<std::size_t>(params.q);
    CountSamples out;
    out.q = params.q;
    out.n = params.n;
    out.counts.resize(chains * per_chain * q);
    out.sweep.resize(chains * per_chain);
    out.chain.resize(chains * per_chain);

    auto run_chain = [&](std::size_t c) {
        GibbsChain chain(params, init, plan.seed, c, region);
        for (long s = 0; s < plan.burn_in; ++s) chain.sweep();
        for (std::size_t k = 0; k < per_chain; ++k) {
            for (long s = 0; s < plan.thinning; ++s) chain.sweep();
            const std::size_t row = c * per_chain + k;
            std::copy(chain.counts().begin(), chain.counts().end(),
                      out.counts.begin() + static_cast<std::ptrdiff_t>(row * q));
            out.sweep[row] = chain.sweep_count();
            out.chain[row] = static_cast<int>(c);
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(plan.threads, static_cast<unsigned>(chains)));
    if (workers == 1) {
        for (std::size_t c = 0; c < chains; ++c) run_chain(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t c = next++; c < chains; c = next++) run_chain(c);
            });
    }
    return out;
}

Eigen::MatrixXd fluctuations(const CountSamples& samples, const Eigen::VectorXd& center) {
    const double n = samples.n;
    const double root_n = std::sqrt(n);
    Eigen::MatrixXd w(static_cast<Eigen::Index>(samples.size()), samples.q);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto c = samples.at(k);
        for (int i = 0; i < samples.q; ++i)
            w(static_cast<Eigen::Index>(k), i) = root_n * (c[static_cast<std::size_t>(i)] / n - center[i]);
    }
    return w;
}

CountSamples sample_fluctuations(const ModelParams& params, const Eigen::VectorXd& center, const SamplingPlan& plan) {
    return sample_counts(params, center, plan);
}

CountSamples conditioned_sample(const ModelParams& params, const ConditionedRegion& region, const SamplingPlan& plan) {
    return sample_counts(params, region.center, plan, region);
}

void write_csv(std::ostream& out, const CountSamples& samples, const Eigen::VectorXd& center) {
    out << "chain,sweep";
    for (int i = 0; i < samples.q; ++i) out << ",W_" << i + 1;
    out << '\n';
    const auto w = fluctuations(samples, center);
    const auto old_precision = out.precision(17);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        out << samples.chain[k] << ',' << samples.sweep[k];
        for (int i = 0; i < samples.q; ++i) out << ',' << w(static_cast<Eigen::Index>(k), i);
        out << '\n';
    }
    out.precision(old_precision);
}

}  // namespace cwp

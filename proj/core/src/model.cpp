#include "cwp/model.hpp"

#include "cwp/error.hpp"
#include "cwp/numeric.hpp"
#include "cwp/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>

namespace cwp {

void PhasePoint::validate() const {
    if (q < 3) throw ConfigError("q must be at least 3, got " + std::to_string(q));
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 0");
    if (!(h >= 0.0) || !std::isfinite(h)) throw ConfigError("h must be finite and >= 0");
}

void ModelParams::validate() const {
    phase().validate();
    if (n < 1) throw ConfigError("n must be at least 1, got " + std::to_string(n));
}

CountVector::CountVector(std::vector<int> counts) : counts_(std::move(counts)) {
    if (counts_.empty()) throw ConfigError("empty count vector");
    for (int c : counts_)
        if (c < 0) throw ConfigError("negative count");
    n_ = std::accumulate(counts_.begin(), counts_.end(), 0);
}

Eigen::VectorXd CountVector::proportions() const {
    Eigen::VectorXd x(q());
    for (int i = 0; i < q(); ++i) x[i] = static_cast<double>(counts_[static_cast<std::size_t>(i)]) / n_;
    return x;
}

SpinConfiguration::SpinConfiguration(int q, std::vector<int> spins) : q_(q), spins_(std::move(spins)) {
    for (int s : spins_)
        if (s < 0 || s >= q_) throw ConfigError("spin color out of range");
}

void SpinConfiguration::set(int site, int color) { spins_[static_cast<std::size_t>(site)] = color; }

CountVector SpinConfiguration::tally() const {
    std::vector<int> counts(static_cast<std::size_t>(q_), 0);
    for (int s : spins_) ++counts[static_cast<std::size_t>(s)];
    return CountVector(std::move(counts));
}

double SpinConfiguration::m(int color) const {
    return static_cast<double>(std::count(spins_.begin(), spins_.end(), color)) / n();
}

double SpinConfiguration::m_leave_one_out(int color, int site) const {
    const auto count = std::count(spins_.begin(), spins_.end(), color);
    return static_cast<double>(count - (spin(site) == color ? 1 : 0)) / n();
}

namespace {

double log_weight_raw(std::span<const int> nu, int n, double beta, double h, const LogFactorials& lf) {
    double value = lf(n);
    double square = 0.0;
    for (int c : nu) {
        value -= lf(c);
        square += static_cast<double>(c) * c;
    }
    return value + beta / (2.0 * n) * square + h * nu[0];
}

// Successor in colexicographic order over compositions stored in c[0..parts-1].
// Returns false after the last composition.
bool next_composition(std::span<int> c) {
    const std::size_t parts = c.size();
    if (parts == 1) return false;
    if (c[0] > 0) {
        --c[0];
        ++c[1];
        return true;
    }
    std::size_t j = 1;
    while (j < parts && c[j] == 0) ++j;
    if (j + 1 >= parts) return false;
    ++c[j + 1];
    c[0] = c[j] - 1;
    c[j] = 0;
    return true;
}

std::uint64_t binomial_saturating(std::uint64_t top, std::uint64_t k) {
    k = std::min(k, top - k);
    constexpr auto saturated = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t value = 1;  // C(top - k + i, i) after step i, so the division is exact
    for (std::uint64_t i = 1; i <= k; ++i) {
        const std::uint64_t factor = top - k + i;
        if (value > saturated / factor) return saturated;
        value = value * factor / i;
    }
    return value;
}

}  // namespace

double log_weight(const CountVector& nu, const ModelParams& params) {
    params.validate();
    if (nu.q() != params.q) throw ConfigError("count vector has wrong number of colors");
    if (nu.n() != params.n) throw ConfigError("count vector does not sum to n");
    const LogFactorials lf(params.n);
    return log_weight_raw(nu.counts(), params.n, params.beta, params.h, lf);
}

std::uint64_t composition_count(int n, int q) {
    return binomial_saturating(static_cast<std::uint64_t>(n + q - 1), static_cast<std::uint64_t>(q - 1));
}

void for_each_composition(int n, int q, const std::function<void(std::span<const int>)>& visit) {
    std::vector<int> c(static_cast<std::size_t>(q), 0);
    c[0] = n;
    do {
        visit(c);
    } while (next_composition(c));
}

double ExactLaw::prob(std::size_t k) const { return std::exp(log_probs_[k]); }

ExactLaw ExactLaw::restricted(const std::function<bool(std::span<const int>)>& keep) const {
    ExactLaw out;
    out.params_ = params_;
    std::vector<double> kept;
    for (std::size_t k = 0; k < size(); ++k) {
        const auto a = atom(k);
        if (!keep(a)) continue;
        out.support_.insert(out.support_.end(), a.begin(), a.end());
        kept.push_back(log_probs_[k]);
    }
    if (kept.empty()) throw NumericError("restriction removes every atom");
    const double log_mass = log_sum_exp(kept);
    for (double& v : kept) v -= log_mass;
    out.log_probs_ = std::move(kept);
    return out;
}

std::vector<std::size_t> ExactLaw::sample(std::size_t count, std::uint64_t seed) const {
    std::vector<double> cumulative(size());
    double running = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
        running += prob(k);
        cumulative[k] = running;
    }
    Rng rng(seed);
    std::vector<std::size_t> out(count);
    for (auto& idx : out) {
        const double u = rng.uniform() * running;
        idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        idx = std::min(idx, size() - 1);
    }
    return out;
}

ExactLaw exact_law(const ModelParams& params, unsigned threads) {
    params.validate();
    const int n = params.n;
    const int q = params.q;
    const std::uint64_t total = composition_count(n, q);
    if (total > kEnumerationBudget)
        throw CapacityError("exact law needs " + std::to_string(total) + " compositions; budget is " +
                            std::to_string(kEnumerationBudget));

    // One chunk per value of the last coordinate: contiguous in colex order and
    // independent of the worker count, so the reduction below is deterministic.
    const int chunks = n + 1;
    std::vector<std::size_t> offset(static_cast<std::size_t>(chunks) + 1, 0);
    for (int v = 0; v < chunks; ++v)
        offset[static_cast<std::size_t>(v) + 1] =
            offset[static_cast<std::size_t>(v)] + static_cast<std::size_t>(composition_count(n - v, q - 1));

    ExactLaw law;
    law.params_ = params;
    law.support_.resize(static_cast<std::size_t>(total) * static_cast<std::size_t>(q));
    law.log_probs_.resize(static_cast<std::size_t>(total));
    std::vector<double> chunk_log_mass(static_cast<std::size_t>(chunks));
    const LogFactorials lf(n);

    auto run_chunk = [&](int v) {
        std::vector<int> c(static_cast<std::size_t>(q), 0);
        c[0] = n - v;
        c[static_cast<std::size_t>(q) - 1] = v;
        std::span<int> head(c.data(), static_cast<std::size_t>(q) - 1);
        std::size_t k = offset[static_cast<std::size_t>(v)];
        const std::size_t first = k;
        do {
            std::copy(c.begin(), c.end(), law.support_.begin() + static_cast<std::ptrdiff_t>(k * q));
            law.log_probs_[k] = log_weight_raw(c, n, params.beta, params.h, lf);
            ++k;
        } while (next_composition(head));
        chunk_log_mass[static_cast<std::size_t>(v)] =
            log_sum_exp(std::span<const double>(law.log_probs_.data() + first, k - first));
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
    if (workers == 1) {
        for (int v = 0; v < chunks; ++v) run_chunk(v);
    } else {
        std::atomic<int> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int v = next++; v < chunks; v = next++) run_chunk(v);
            });
    }

    const double log_z = log_sum_exp(chunk_log_mass);
    for (double& lp : law.log_probs_) lp -= log_z;
    return law;
}

double StepCdf::operator()(double t) const {
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    if (it == x.begin()) return 0.0;
    return cdf[static_cast<std::size_t>(it - x.begin()) - 1];
}

std::vector<double> marginal_pmf(const ExactLaw& law, int coord) {
    std::vector<double> pmf(static_cast<std::size_t>(law.n()) + 1, 0.0);
    for (std::size_t k = 0; k < law.size(); ++k) pmf[static_cast<std::size_t>(law.atom(k)[coord])] += law.prob(k);
    return pmf;
}

std::vector<double> streamed_first_marginal(const ModelParams& params) {
    params.validate();
    const int n = params.n;
    const LogFactorials lf(n);
    const std::size_t bins = static_cast<std::size_t>(n) + 1;
    // Online log-sum-exp per value of N_1.
    std::vector<double> top(bins, -std::numeric_limits<double>::infinity());
    std::vector<double> acc(bins, 0.0);
    for_each_composition(n, params.q, [&](std::span<const int> c) {
        const double w = log_weight_raw(c, n, params.beta, params.h, lf);
        const auto b = static_cast<std::size_t>(c[0]);
        if (w > top[b]) {
            acc[b] = acc[b] * std::exp(top[b] - w) + 1.0;
            top[b] = w;
        } else {
            acc[b] += std::exp(w - top[b]);
        }
    });
    std::vector<double> log_mass(bins);
    for (std::size_t b = 0; b < bins; ++b) log_mass[b] = top[b] + std::log(acc[b]);
    const double log_z = log_sum_exp(log_mass);
    std::vector<double> pmf(bins);
    for (std::size_t b = 0; b < bins; ++b) pmf[b] = std::exp(log_mass[b] - log_z);
    return pmf;
}

StepCdf step_cdf_from_pmf(std::span<const double> pmf, double center, double scale) {
    StepCdf out;
    const double n = static_cast<double>(pmf.size()) - 1.0;
    double running = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        if (pmf[k] <= 0.0) continue;
        running += pmf[k];
        out.x.push_back((static_cast<double>(k) - n * center) / scale);
        out.mass.push_back(pmf[k]);
        out.cdf.push_back(running);
    }
    return out;
}

StepCdf exact_marginal_cdf(const ExactLaw& law, int coord, double center, double scale) {
    return step_cdf_from_pmf(marginal_pmf(law, coord), center, scale);
}

double exact_moment(const ExactLaw& law, std::span<const int> powers, const Eigen::VectorXd& center,
                    double scale) {
    const int q = law.q();
    const double n = law.n();
    double total = 0.0;
    for (std::size_t k = 0; k < law.size(); ++k) {
        const auto a = law.atom(k);
        double term = law.prob(k);
        for (int i = 0; i < q; ++i) {
            const double w = (a[static_cast<std::size_t>(i)] - n * center[i]) / scale;
            for (int r = 0; r < powers[static_cast<std::size_t>(i)]; ++r) term *= w;
        }
        total += term;
    }
    return total;
}

Eigen::MatrixXd exact_second_moment(const ExactLaw& law, const Eigen::VectorXd& center) {
    const int q = law.q();
    const double n = law.n();
    const double root_n = std::sqrt(n);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q, q);
    Eigen::VectorXd w(q);
    for (std::size_t k = 0; k < law.size(); ++k) {
        const auto a = law.atom(k);
        for (int i = 0; i < q; ++i) w[i] = (a[static_cast<std::size_t>(i)] / n - center[i]) * root_n;
        m.noalias() += law.prob(k) * w * w.transpose();
    }
    return m;
}

Eigen::VectorXd exact_mean_proportions(const ExactLaw& law) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(law.q());
    for (std::size_t k = 0; k < law.size(); ++k) {
        const auto a = law.atom(k);
        for (int i = 0; i < law.q(); ++i) mean[i] += law.prob(k) * a[static_cast<std::size_t>(i)];
    }
    return mean / law.n();
}

void write_csv(std::ostream& out, const ExactLaw& law) {
    for (int i = 0; i < law.q(); ++i) out << "nu_" << i + 1 << ',';
    out << "log_prob\n";
    const auto old_precision = out.precision(17);
    for (std::size_t k = 0; k < law.size(); ++k) {
        for (int c : law.atom(k)) out << c << ',';
        out << law.log_prob(k) << '\n';
    }
    out.precision(old_precision);
}

CountVector nearest_counts(const Eigen::VectorXd& x, int n) {
    const auto q = static_cast<std::size_t>(x.size());
    std::vector<int> counts(q);
    std::vector<std::pair<double, std::size_t>> remainder(q);
    int assigned = 0;
    for (std::size_t i = 0; i < q; ++i) {
        const double target = std::max(0.0, x[static_cast<Eigen::Index>(i)]) * n;
        counts[i] = static_cast<int>(std::floor(target));
        remainder[i] = {target - counts[i], i};
        assigned += counts[i];
    }
    // Largest remainders first; ties go to the lower color index.
    std::stable_sort(remainder.begin(), remainder.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n; k = (k + 1) % q, ++assigned) ++counts[remainder[k].second];
    for (std::size_t k = q; assigned > n; ++k) {
        auto& c = counts[remainder[(q - 1) - (k % q)].second];
        if (c > 0) {
            --c;
            --assigned;
        }
    }
    return CountVector(std::move(counts));
}

}  // namespace cwp

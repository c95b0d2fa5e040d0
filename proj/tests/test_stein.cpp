#include "doctest.h"
#include "enumeration.hpp"

#include "cwp/error.hpp"
#include "cwp/numeric.hpp"
#include "cwp/stein.hpp"

#include <boost/math/distributions/normal.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

using namespace cwp;
using oracle::brute_force;
using oracle::w_of;

namespace {

double max_gap(const PairMoments& a, const PairMoments& b) {
    double gap = std::max((a.drift - b.drift).cwiseAbs().maxCoeff(), (a.second - b.second).cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < a.third_abs.size(); ++k) gap = std::max(gap, std::abs(a.third_abs[k] - b.third_abs[k]));
    return gap;
}

double binomial_kolmogorov(int n, double p) {
    // sup over both sides of each jump of |F_bin - Phi| for sqrt(n)(N/n - p) vs N(0, p(1-p))
    double below = 0, sup = 0;
    for (int k = 0; k <= n; ++k) {
        const double t = std::sqrt(double(n)) * (double(k) / n - p);
        const double g = normal_cdf(t / std::sqrt(p * (1 - p)));
        const double above = below + oracle::binomial_pmf(n, k, p);
        sup = std::max({sup, std::abs(above - g), std::abs(below - g)});
        below = above;
    }
    return sup;
}

ExactLaw law_at(double beta, int n) { return exact_law({3, beta, 0.0, n}); }

}  // namespace

TEST_CASE("pair moments for a single site") {
    const ModelParams p{3, 1.7, 0.0, 1};
    const std::vector<int> counts = {0, 1, 0};
    const auto m = pair_moments_exact(p, counts);
    CHECK(m.drift[0] == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(m.drift[1] == doctest::Approx(-2.0 / 3).epsilon(1e-14));
    CHECK(m.drift[2] == doctest::Approx(1.0 / 3).epsilon(1e-14));
}

TEST_CASE("pair moments match brute-force enumeration") {
    for (int n : {1, 2, 3}) {
        for (const ModelParams p : {ModelParams{3, 2.0, 0.0, n}, ModelParams{3, 3.1, 0.4, n}, ModelParams{4, 1.2, 0.2, n}}) {
            for (const auto& spins : oracle::all_configurations(p.q, n)) {
                std::vector<int> counts(static_cast<std::size_t>(p.q), 0);
                for (int s : spins) ++counts[static_cast<std::size_t>(s)];
                CHECK(max_gap(pair_moments_exact(p, counts), brute_force(p, spins, std::nullopt)) <= 1e-14);
            }
        }
    }
    // with a region: rejected moves contribute nothing
    const ModelParams p{3, 3.2, 0.0, 3};
    const ConditionedRegion region{Eigen::Vector3d(0.865, 0.0675, 0.0675), 0.3};
    for (const auto& spins : oracle::all_configurations(3, 3)) {
        std::vector<int> counts(3, 0);
        for (int s : spins) ++counts[static_cast<std::size_t>(s)];
        if (!region.contains(counts, 3)) continue;
        CHECK(max_gap(pair_moments_exact(p, counts, region), brute_force(p, spins, region)) <= 1e-14);
    }
}

TEST_CASE("pair moment structure") {
    const ModelParams p{4, 2.3, 0.15, 40};
    const auto law = exact_law(p);
    for (std::size_t k = 0; k < law.size(); k += 37) {
        const auto m = pair_moments_exact(p, law.atom(k));
        CHECK(std::abs(m.drift.sum()) <= 1e-15);
        CHECK((m.second * Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.second).eigenvalues().minCoeff() >= -1e-15);
        const double cap = std::pow(2.0 / p.n, 1.5);
        for (double v : m.third_abs) CHECK(v <= cap);
    }
}

TEST_CASE("regression residual") {
    const ModelParams p{3, 2.0, 0.0, 30};
    const auto m = find_minimizers(p.phase()).minimizers.front();
    const auto lam = regression_matrix(p.phase(), m, p.n);
    const std::vector<int> at_center = {10, 10, 10};
    const auto r = regression_residual(p, at_center, lam, m.x);
    CHECK((r - pair_moments_exact(p, at_center).drift).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.cwiseAbs().maxCoeff() <= 1e-15);  // symmetric state: drift vanishes too
}

TEST_CASE("stationary identities of the exchangeable pair") {
    // E[Delta] = 0 and E[Delta Delta^T] = Lambda S + S Lambda^T - E[R W^T] - E[W R^T], S = E[W W^T]
    for (const ModelParams p : {ModelParams{3, 2.0, 0.0, 200}, ModelParams{3, 2.4, 0.1, 80}}) {
        const auto m = find_minimizers(p.phase()).minimizers.front();
        const auto lam = regression_matrix(p.phase(), m, p.n);
        const auto law = exact_law(p);
        Eigen::VectorXd drift = Eigen::VectorXd::Zero(3);
        Eigen::MatrixXd second = Eigen::MatrixXd::Zero(3, 3), s = second, rw = second;
        for (std::size_t k = 0; k < law.size(); ++k) {
            const double pk = law.prob(k);
            const auto pm = pair_moments_exact(p, law.atom(k));
            const Eigen::VectorXd w = w_of(law.atom(k), m.x);
            const Eigen::VectorXd r = pm.drift + lam.lambda * w;
            drift += pk * pm.drift;
            second += pk * pm.second;
            s += pk * w * w.transpose();
            rw += pk * r * w.transpose();
        }
        const Eigen::MatrixXd rhs = lam.lambda * s + s * lam.lambda.transpose() - rw - rw.transpose();
        CHECK(drift.cwiseAbs().maxCoeff() <= 1e-16);
        CHECK((second - rhs).cwiseAbs().maxCoeff() <= 1e-12 * second.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("bound terms") {
    const ModelParams p{3, 2.0, 0.0, 64};
    const auto m = find_minimizers(p.phase()).minimizers.front();
    const auto lam = regression_matrix(p.phase(), m, p.n);
    const auto law = exact_law(p);
    CountSamples draws;
    draws.q = 3;
    draws.n = p.n;
    for (auto idx : law.sample(4000, 77)) {
        const auto a = law.atom(idx);
        draws.counts.insert(draws.counts.end(), a.begin(), a.end());
        draws.sweep.push_back(0);
        draws.chain.push_back(0);
    }
    const auto samples = stein_samples(p, draws, lam, m.x);
    const auto terms = bound_terms(samples, lam);
    CHECK(terms.A3.value == lam.column_sums.sum());
    CHECK(terms.A3.se == 0.0);
    CHECK(terms.A1.value == terms.A.value);
    CHECK(terms.B.value <= terms.B_ceiling);
    CHECK(terms.B_ceiling == doctest::Approx(lam.column_sums.sum() * 9 * std::pow(2.0 / 64, 1.5)));
    for (const auto& e : {terms.A, terms.B, terms.C, terms.A2}) {
        CHECK(std::isfinite(e.value));
        CHECK(e.value > 0.0);
        CHECK(e.se > 0.0);
        CHECK(e.se < e.value);
    }
    CHECK(terms.sample_size == 4000);
    CHECK_THROWS_AS(bound_terms(std::span(samples).first(999), lam), NumericError);
}

TEST_CASE("residual shrinks like n^{-3/2}") {
    std::vector<std::pair<double, double>> rms;
    for (int n : {32, 64, 128, 256, 512}) {
        const ModelParams p{3, 2.0, 0.0, n};
        const auto m = find_minimizers(p.phase()).minimizers.front();
        const auto lam = regression_matrix(p.phase(), m, n);
        const auto law = exact_law(p);
        double acc = 0;
        for (std::size_t k = 0; k < law.size(); ++k)
            acc += law.prob(k) * regression_residual(p, law.atom(k), lam, m.x).squaredNorm();
        rms.emplace_back(n, std::sqrt(acc));
    }
    const auto fit = rate_fit(rms);
    MESSAGE("rms residual slope " << fit.slope);
    CHECK(std::abs(fit.slope + 1.5) <= 0.3);
}

TEST_CASE("Kolmogorov distance helpers") {
    // quantile points of the target: distance is exactly half a step
    const int m = 1000;
    std::vector<double> values;
    boost::math::normal_distribution<> z;
    for (int k = 0; k < m; ++k) values.push_back(boost::math::quantile(z, (k + 0.5) / m));
    CHECK(kolmogorov_samples(values, [](double t) { return normal_cdf(t); }) == doctest::Approx(0.5 / m).epsilon(1e-9));

    StepCdf jump{{0.0}, {1.0}, {1.0}};
    CHECK(kolmogorov_step(jump, [](double t) { return normal_cdf(t); }) == doctest::Approx(0.5));
}

TEST_CASE("beta = 0 marginal distance equals the binomial oracle") {
    for (double h : {0.0, 0.5})
        for (int n : {10, 57, 300}) {
            const double p1 = std::exp(h) / (std::exp(h) + 2);
            const auto law = exact_law({3, 0.0, h, n});
            const Eigen::VectorXd center = Eigen::Vector3d(p1, (1 - p1) / 2, (1 - p1) / 2);
            const double lib = kolmogorov_exact_marginal(law, center, p1 * (1 - p1));
            CHECK(std::abs(lib - binomial_kolmogorov(n, p1)) <= 1e-10);
        }
}

TEST_CASE("exact marginal distance halves when n quadruples") {
    const Eigen::VectorXd center = Eigen::VectorXd::Constant(3, 1.0 / 3);
    const double small = kolmogorov_exact_marginal(law_at(2.0, 50), center, 2.0 / 3);
    const double large = kolmogorov_exact_marginal(law_at(2.0, 200), center, 2.0 / 3);
    MESSAGE("ratio " << large / small);
    CHECK(large / small >= 0.4);
    CHECK(large / small <= 0.6);
}

TEST_CASE("bivariate normal CDF") {
    for (double rho : {-0.9, -0.3, 0.0, 0.5, 0.95})
        CHECK(bivariate_normal_cdf(0, 0, rho) == doctest::Approx(0.25 + std::asin(rho) / (2 * std::numbers::pi)).epsilon(1e-13));
    CHECK(bivariate_normal_cdf(0.3, -1.1, 0.0) == doctest::Approx(normal_cdf(0.3) * normal_cdf(-1.1)).epsilon(1e-14));
    CHECK(bivariate_normal_cdf(0.3, -1.1, 1.0) == doctest::Approx(normal_cdf(-1.1)));
    CHECK(bivariate_normal_cdf(0.3, 1.1, -1.0) == doctest::Approx(normal_cdf(0.3) - normal_cdf(-1.1)));
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(bivariate_normal_cdf(inf, inf, 0.4) == 1.0);
    // symmetry Phi2(a, b) = Phi2(b, a) and Phi2(a,b) + Phi2(a,-b; -rho) = Phi(a)
    CHECK(bivariate_normal_cdf(0.7, -0.2, 0.6) == doctest::Approx(bivariate_normal_cdf(-0.2, 0.7, 0.6)).epsilon(1e-14));
    CHECK(bivariate_normal_cdf(0.7, -0.2, 0.6) + bivariate_normal_cdf(0.7, 0.2, -0.6) ==
          doctest::Approx(normal_cdf(0.7)).epsilon(1e-13));
}

TEST_CASE("quadrant grid distance") {
    const ModelParams p{3, 2.0, 0.0, 100};
    const Eigen::VectorXd center = Eigen::VectorXd::Constant(3, 1.0 / 3);
    const Eigen::MatrixXd sigma = theoretical_sigma(p.phase(), find_minimizers(p.phase()).minimizers.front());
    const Eigen::Matrix2d cov = sigma.topLeftCorner(2, 2);
    const auto law = exact_law(p);

    const double inf = std::numeric_limits<double>::infinity();
    CHECK(kolmogorov_quadrant_grid(law, center, cov, QuadrantGrid{{inf}, {inf}}) <= 1e-12);

    const auto coarse = QuadrantGrid::covering(cov, 21);
    const auto fine = QuadrantGrid::covering(cov, 41);
    const double d_coarse = kolmogorov_quadrant_grid(law, center, cov, coarse);
    const double d_fine = kolmogorov_quadrant_grid(law, center, cov, fine);
    CHECK(d_fine >= d_coarse);

    // same sup from a large i.i.d. sample of the exact law
    std::vector<Eigen::Vector2d> points;
    const std::size_t draws = 1000000;
    points.reserve(draws);
    for (auto idx : law.sample(draws, 4242)) {
        const auto a = law.atom(idx);
        points.emplace_back(std::sqrt(100.0) * (a[0] / 100.0 - center[0]), std::sqrt(100.0) * (a[1] / 100.0 - center[1]));
    }
    const double d_mc = kolmogorov_quadrant_grid(points, cov, fine);
    const double se = 0.5 / std::sqrt(static_cast<double>(draws));
    MESSAGE("exact " << d_fine << " mc " << d_mc);
    CHECK(std::abs(d_mc - d_fine) <= 3 * se);
}

TEST_CASE("rate fit") {
    const std::vector<std::pair<double, double>> two = {{100, 0.1}, {400, 0.05}};
    CHECK(rate_fit(two).slope == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(rate_fit(two).r_squared == doctest::Approx(1.0));

    std::vector<std::pair<double, double>> quarter;
    for (double n : {64.0, 128.0, 256.0, 512.0}) quarter.emplace_back(n, 3.0 * std::pow(n, -0.25));
    const auto fq = rate_fit(quarter);
    CHECK(fq.slope == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(fq.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::exp(fq.intercept) == doctest::Approx(3.0).epsilon(1e-12));

    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<std::pair<double, double>> noisy;
        for (double n = 50; n <= 6400; n *= 2) noisy.emplace_back(n, std::pow(n, -0.5) * (1 + 0.1 * (rng.uniform() - 0.5)));
        CHECK(std::abs(rate_fit(noisy).slope + 0.5) <= 0.05);
    }

    const std::vector<std::pair<double, double>> bad = {{10, 0.1}, {20, 0.0}};
    CHECK_THROWS_AS(rate_fit(bad), ConfigError);
    const std::vector<std::pair<double, double>> single = {{10, 0.1}};
    CHECK_THROWS_AS(rate_fit(single), ConfigError);
}

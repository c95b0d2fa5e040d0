#include "lab.hpp"

#include "cwp/critical.hpp"
#include "cwp/error.hpp"
#include "cwp/free_energy.hpp"
#include "cwp/hs_oracle.hpp"
#include "cwp/model.hpp"
#include "cwp/numeric.hpp"
#include "cwp/sampler.hpp"
#include "cwp/stein.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace cwp::lab {

namespace {

Json vec(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Json mat(const Eigen::MatrixXd& m) {
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vec(m.row(r).transpose()));
    return out;
}

Json estimate(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

Json fit_json(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) return nullptr;
    const auto fit = rate_fit(points);
    return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
}

int positive(const Config& c, const std::string& key) {
    const auto v = c.integer(key);
    if (v < 1 || v > 100'000'000) throw ConfigError("key '" + key + "' must be a positive integer");
    return static_cast<int>(v);
}

int non_negative(const Config& c, const std::string& key) {
    const auto v = c.integer(key);
    if (v < 0 || v > 100'000'000) throw ConfigError("key '" + key + "' must be a non-negative integer");
    return static_cast<int>(v);
}

ModelParams model(const Config& c, int n) {
    ModelParams p{static_cast<int>(c.integer("q")), c.real("beta"), c.real("h"), n};
    p.validate();
    return p;
}

PhaseClassification classify(const PhasePoint& p) { return find_minimizers(p); }

std::size_t minimizer_index(const Config& c, const PhaseClassification& cls) {
    const auto idx = c.integer("minimizer");
    if (idx < 0 || static_cast<std::size_t>(idx) >= cls.minimizers.size())
        throw ConfigError("minimizer index " + std::to_string(idx) + " out of range; this phase point has " +
                          std::to_string(cls.minimizers.size()));
    return static_cast<std::size_t>(idx);
}

double minimizer_gap(const PhaseClassification& cls) {
    if (cls.minimizers.size() < 2) throw ConfigError("conditioned mode needs a phase point with several minimizers");
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < cls.minimizers.size(); ++a)
        for (std::size_t b = a + 1; b < cls.minimizers.size(); ++b)
            gap = std::min(gap, (cls.minimizers[a].x - cls.minimizers[b].x).norm());
    return gap;
}

ConditionedRegion region_for(const Config& c, const PhaseClassification& cls) {
    const double fraction = c.real("epsilon");
    if (!(fraction > 0.0 && fraction < 0.5)) throw ConfigError("epsilon is a fraction of the minimizer gap in (0, 0.5)");
    return make_region(cls, minimizer_index(c, cls), fraction * minimizer_gap(cls));
}

SamplingPlan plan(const Config& c, std::size_t samples_per_chain) {
    SamplingPlan p;
    p.samples_per_chain = samples_per_chain;
    p.burn_in = non_negative(c, "burn_in");
    p.thinning = c.values().contains("thinning") ? positive(c, "thinning") : 1;
    p.chains = positive(c, "chains");
    p.seed = c.seed();
    p.threads = c.threads();
    return p;
}

std::string format_of(const Config& c, bool csv_allowed) {
    const auto f = c.text("format");
    if (f != "json" && f != "csv") throw ConfigError("format must be csv or json");
    if (f == "csv" && !csv_allowed) throw ConfigError(c.subcommand() + " emits JSON only");
    return f;
}

std::string schema(const Config& c) { return "cwp-lab/" + c.subcommand() + "/v1"; }

Artifact json_artifact(const Config& c, Json body) {
    Json doc = {{"schema", schema(c)}, {"run_id", c.run_id()}, {"manifest", "manifest.json"}};
    for (auto& [key, value] : body.items()) doc[key] = std::move(value);
    return {c.subcommand() + ".json", schema(c), doc.dump(2) + "\n"};
}

// CSV with one leading comment line naming the schema and run.
Artifact csv_artifact(const Config& c, const std::string& table) {
    std::string body = "# schema=" + schema(c) + " run_id=" + c.run_id() + " manifest=manifest.json\n" + table;
    return {c.subcommand() + ".csv", schema(c), std::move(body)};
}

std::string csv_rows(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + header[k];
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + number(row[k]);
        out += '\n';
    }
    return out;
}

Json json_rows(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
    Json table = Json::array();
    for (const auto& row : rows) {
        Json entry = Json::object();
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (header[k] == "n" || header[k] == "samples") entry[header[k]] = static_cast<std::int64_t>(row[k]);
            else entry[header[k]] = row[k];
        }
        table.push_back(entry);
    }
    return table;
}

std::vector<double> axis_values(double lo, double hi, int points) {
    std::vector<double> out;
    for (int k = 0; k < points; ++k) out.push_back(points == 1 ? lo : lo + (hi - lo) * k / (points - 1));
    return out;
}

// ---------------------------------------------------------------------------

RunResult phase_report(const Config& c) {
    const auto format = format_of(c, true);
    const int q = static_cast<int>(c.integer("q"));
    const int nb = non_negative(c, "beta_points"), nh = non_negative(c, "h_points");
    Json points = Json::array();
    std::vector<std::vector<double>> rows;
    std::map<std::string, int> tags;
    for (double beta : axis_values(c.real("beta_min"), c.real("beta_max"), nb))
        for (double h : axis_values(c.real("h_min"), c.real("h_max"), nh)) {
            const PhasePoint p{q, beta, h};
            p.validate();
            const auto cls = classify(p);
            const std::string tag(to_string(cls.tag));
            ++tags[tag];
            Json mins = Json::array();
            for (const auto& m : cls.minimizers) {
                const auto hs = hessian_summary(p, m);
                Json sigma = nullptr;
                if (hs.positive_definite) sigma = mat(theoretical_sigma(p, m));
                mins.push_back({{"x", vec(m.x)},
                                {"s", m.s},
                                {"large_slot", m.large_slot},
                                {"hessian_det", hs.det},
                                {"positive_definite", hs.positive_definite},
                                {"degenerate", hs.degenerate},
                                {"sigma", sigma}});
            }
            points.push_back({{"beta", beta}, {"h", h}, {"tag", tag}, {"minimizers", mins}});
            rows.push_back({beta, h, static_cast<double>(cls.minimizers.size())});
        }
    RunResult r;
    r.summary = {{"points", points.size()}, {"tags", tags}};
    if (format == "json") {
        r.artifacts.push_back(json_artifact(c, {{"points", points}}));
    } else {
        std::string table = "beta,h,tag,minimizers\n";
        for (std::size_t k = 0; k < rows.size(); ++k)
            table += number(rows[k][0]) + "," + number(rows[k][1]) + "," + points[k]["tag"].get<std::string>() + "," +
                     number(rows[k][2]) + "\n";
        r.artifacts.push_back(csv_artifact(c, table));
    }
    return r;
}

RunResult exact_law_cmd(const Config& c) {
    const auto format = format_of(c, true);
    const auto p = model(c, positive(c, "n"));
    const auto cls = classify(p.phase());
    const auto& m = cls.minimizers[minimizer_index(c, cls)];
    const auto law = exact_law(p, c.threads());
    RunResult r;
    r.summary = {{"atoms", law.size()},
                 {"mean_proportions", vec(exact_mean_proportions(law))},
                 {"center", vec(m.x)},
                 {"second_moment", mat(exact_second_moment(law, m.x))}};
    if (format == "csv") {
        std::ostringstream table;
        write_csv(table, law);
        r.artifacts.push_back(csv_artifact(c, table.str()));
    } else {
        Json atoms = Json::array(), log_prob = Json::array();
        for (std::size_t k = 0; k < law.size(); ++k) {
            const auto a = law.atom(k);
            atoms.push_back(std::vector<int>(a.begin(), a.end()));
            log_prob.push_back(law.log_prob(k));
        }
        r.artifacts.push_back(json_artifact(c, {{"atoms", atoms}, {"log_prob", log_prob}}));
    }
    return r;
}

RunResult sample_cmd(const Config& c) {
    const auto format = format_of(c, true);
    const auto p = model(c, positive(c, "n"));
    const auto cls = classify(p.phase());
    const auto pl = plan(c, static_cast<std::size_t>(positive(c, "samples_per_chain")));
    Eigen::VectorXd center;
    CountSamples samples;
    if (c.flag("conditioned")) {
        const auto region = region_for(c, cls);
        center = region.center;
        samples = conditioned_sample(p, region, pl);
    } else {
        center = cls.minimizers[minimizer_index(c, cls)].x;
        samples = sample_fluctuations(p, center, pl);
    }
    const Eigen::MatrixXd w = fluctuations(samples, center);
    const Eigen::VectorXd mean = w.colwise().mean().transpose();
    const Eigen::MatrixXd centered = w.rowwise() - mean.transpose();
    RunResult r;
    r.summary = {{"samples", samples.size()},
                 {"center", vec(center)},
                 {"mean_w", vec(mean)},
                 {"covariance_w", mat(centered.transpose() * centered / std::max<double>(1.0, double(w.rows()) - 1))}};
    if (format == "csv") {
        std::ostringstream table;
        write_csv(table, samples, center);
        r.artifacts.push_back(csv_artifact(c, table.str()));
    } else {
        Json rows = Json::array();
        for (Eigen::Index k = 0; k < w.rows(); ++k)
            rows.push_back({{"chain", samples.chain[static_cast<std::size_t>(k)]},
                            {"sweep", samples.sweep[static_cast<std::size_t>(k)]},
                            {"w", vec(w.row(k).transpose())}});
        r.artifacts.push_back(json_artifact(c, {{"center", vec(center)}, {"rows", rows}}));
    }
    return r;
}

RunResult clt_rate(const Config& c) {
    const auto format = format_of(c, true);
    const auto grid_n = c.int_list("n_grid");
    const bool conditioned = c.flag("conditioned");
    const int quadrant_points = positive(c, "quadrant_points");
    const auto cls = classify(model(c, 1).phase());
    std::optional<ConditionedRegion> region;
    if (conditioned) region = region_for(c, cls);
    const Eigen::VectorXd center = region ? region->center : cls.minimizers[minimizer_index(c, cls)].x;

    std::vector<std::vector<double>> rows;
    std::vector<std::pair<double, double>> marginal_points, quadrant_points_fit;
    for (int n : grid_n) {
        const auto p = model(c, n);
        auto law = exact_law(p, c.threads());
        if (region) law = law.restricted([&](std::span<const int> counts) { return region->contains(counts, n); });
        // covariance of record: exact second moment at the same n
        const Eigen::MatrixXd cov = exact_second_moment(law, center);
        const Eigen::Matrix2d cov2 = cov.topLeftCorner(2, 2);
        const auto qgrid = QuadrantGrid::covering(cov2, quadrant_points);
        double dk_marginal = 0, dk_quadrant = 0;
        double samples = 0;
        if (!region) {
            dk_marginal = kolmogorov_exact_marginal(law, center, cov(0, 0));
            dk_quadrant = kolmogorov_quadrant_grid(law, center, cov2, qgrid);
        } else {
            const auto drawn = conditioned_sample(p, *region, plan(c, static_cast<std::size_t>(positive(c, "samples_per_chain"))));
            const Eigen::MatrixXd w = fluctuations(drawn, center);
            std::vector<double> w1(w.rows());
            std::vector<Eigen::Vector2d> w12(static_cast<std::size_t>(w.rows()));
            for (Eigen::Index k = 0; k < w.rows(); ++k) {
                w1[static_cast<std::size_t>(k)] = w(k, 0);
                w12[static_cast<std::size_t>(k)] = w.row(k).head<2>().transpose();
            }
            const double var = cov(0, 0);
            dk_marginal = kolmogorov_samples(w1, [var](double t) { return normal_cdf(t, var); });
            dk_quadrant = kolmogorov_quadrant_grid(w12, cov2, qgrid);
            samples = static_cast<double>(w.rows());
        }
        rows.push_back({double(n), cov(0, 0), dk_marginal, dk_quadrant, samples});
        marginal_points.emplace_back(n, dk_marginal);
        quadrant_points_fit.emplace_back(n, dk_quadrant);
    }
    RunResult r;
    r.summary = {{"mode", conditioned ? "conditioned-mc" : "exact"},
                 {"center", vec(center)},
                 {"fit_marginal", fit_json(marginal_points)},
                 {"fit_quadrant", fit_json(quadrant_points_fit)}};
    if (region) r.summary["epsilon"] = region->epsilon;
    const std::vector<std::string> header = {"n", "variance", "dk_marginal", "dk_quadrant", "samples"};
    if (format == "csv") {
        r.artifacts.push_back(csv_artifact(c, csv_rows(header, rows)));
    } else {
        r.artifacts.push_back(json_artifact(c, {{"rows", json_rows(header, rows)}, {"summary", r.summary}}));
    }
    return r;
}

RunResult stein_bounds(const Config& c) {
    format_of(c, false);
    const auto grid_n = c.int_list("n_grid");
    const auto cls = classify(model(c, 1).phase());
    const auto& m = cls.minimizers[minimizer_index(c, cls)];
    Json per_n = Json::array();
    std::vector<BoundTerms> terms;
    std::vector<std::pair<double, double>> residual_points;
    for (int n : grid_n) {
        const auto p = model(c, n);
        const auto lam = regression_matrix(p.phase(), m, n);
        const auto drawn = sample_fluctuations(p, m.x, plan(c, static_cast<std::size_t>(positive(c, "samples_per_chain"))));
        const auto t = bound_terms(stein_samples(p, drawn, lam, m.x), lam);
        Json entry = {{"n", n},           {"samples", t.sample_size}, {"lambda_cols", vec(t.lambda_cols)},
                      {"A", estimate(t.A)}, {"B", estimate(t.B)},     {"C", estimate(t.C)},
                      {"A1", estimate(t.A1)}, {"A2", estimate(t.A2)}, {"A3", estimate(t.A3)},
                      {"B_ceiling", t.B_ceiling}};
        if (c.flag("exact_residual") && composition_count(n, p.q) <= kEnumerationBudget) {
            const auto law = exact_law(p, c.threads());
            Eigen::VectorXd second = Eigen::VectorXd::Zero(p.q);
            for (std::size_t k = 0; k < law.size(); ++k)
                second += law.prob(k) * regression_residual(p, law.atom(k), lam, m.x).array().square().matrix();
            const double rms = second.cwiseSqrt().maxCoeff();
            entry["residual_rms_max"] = rms;
            residual_points.emplace_back(n, rms);
        }
        per_n.push_back(entry);
        terms.push_back(t);
    }
    Json ratios = Json::array();
    for (std::size_t k = 0; k + 1 < terms.size(); ++k) {
        const auto& a = terms[k];
        const auto& b = terms[k + 1];
        ratios.push_back({{"from", grid_n[k]},
                          {"to", grid_n[k + 1]},
                          {"A", b.A.value / a.A.value},
                          {"B", b.B.value / a.B.value},
                          {"C", b.C.value / a.C.value},
                          {"A1", b.A1.value / a.A1.value},
                          {"A2", b.A2.value / a.A2.value},
                          {"A3", b.A3.value / a.A3.value},
                          {"lambda", b.lambda_cols.sum() / a.lambda_cols.sum()}});
    }
    RunResult r;
    r.summary = {{"ratios", ratios}, {"residual_fit", fit_json(residual_points)}};
    r.artifacts.push_back(json_artifact(c, {{"terms", per_n}, {"ratios", ratios}, {"residual_fit", r.summary["residual_fit"]}}));
    return r;
}

RunResult critical_rate(const Config& c) {
    const auto format = format_of(c, true);
    const int q = static_cast<int>(c.integer("q"));
    if (q < 3) throw ConfigError("the extremity exists for q >= 3");
    const auto taylor = extremity_taylor(q);
    const auto k = closed_form_constants(q);
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<double, double>> points;
    for (int n : c.int_list("n_grid")) {
        const auto pmf = streamed_first_marginal({q, k.beta_0, k.h_0, n});
        const auto moment = fourth_moment_exact(pmf, q);
        const double d_f = kolmogorov_t_exact(pmf, q, QuarticLaw::from_fourth_moment(moment.e_t4));
        const double d_g = kolmogorov_t_exact(pmf, q, QuarticLaw::limit(q));
        rows.push_back({double(n), d_f, d_g, moment.e_t4, moment.normalized});
        points.emplace_back(n, d_f);
    }
    RunResult r;
    r.summary = {{"beta_0", k.beta_0},
                 {"h_0", k.h_0},
                 {"fit_dk_f", fit_json(points)},
                 {"v_covariance_target", mat(taylor.v_covariance)}};
    if (const int vn = non_negative(c, "v_check_n"); vn > 0) {
        const ModelParams p{q, k.beta_0, k.h_0, vn};
        const int chains = positive(c, "chains");
        const auto per_chain = static_cast<std::size_t>((positive(c, "v_samples") + chains - 1) / chains);
        const auto v = v_gaussian_check(sample_counts(p, taylor.center, plan(c, per_chain)));
        r.summary["v_check"] = {{"n", vn},
                                {"samples", v.samples},
                                {"var_v2", v.var_v2},
                                {"var_v2_se", v.var_v2_se},
                                {"corr_v2_v3", v.corr_v2_v3},
                                {"cov_empirical", mat(v.cov_empirical)},
                                {"dk_v2_target", v.dk_v2_target},
                                {"dk_v2_empirical", v.dk_v2_empirical}};
    }
    const std::vector<std::string> header = {"n", "dk_f", "dk_g", "e_t4", "normalized_fourth_moment"};
    if (format == "csv") {
        r.artifacts.push_back(csv_artifact(c, csv_rows(header, rows)));
    } else {
        r.artifacts.push_back(json_artifact(c, {{"rows", json_rows(header, rows)}, {"summary", r.summary}}));
    }
    return r;
}

RunResult hs_check(const Config& c) {
    format_of(c, false);
    auto p = model(c, positive(c, "n"));
    if (c.flag("extremity")) {
        const auto k = closed_form_constants(p.q);
        p.beta = k.beta_0;
        p.h = k.h_0;
    }
    const double gamma = c.real("gamma");
    if (!(gamma > 0.0 && gamma <= 0.5)) throw ConfigError("gamma must lie in (0, 1/2]");
    const int points = positive(c, "points");
    const auto cls = classify(p.phase());
    const auto& m = cls.minimizers[minimizer_index(c, cls)];

    std::optional<GridSpec> grid;
    if (const auto& b = c.values().at("bounds"); !b.empty()) {
        if (static_cast<int>(b.size()) != p.q) throw ConfigError("bounds needs one [lo, hi] pair per color");
        GridSpec g;
        for (const auto& pair : b) {
            if (!pair.is_array() || pair.size() != 2) throw ConfigError("bounds entries are [lo, hi] pairs");
            g.axes.push_back({pair[0].get<double>(), pair[1].get<double>(), points});
        }
        grid = g;
    }
    RunResult r;
    Json body;
    if (c.flag("compare")) {
        const auto law = exact_law(p, c.threads());
        const GridSpec g = grid ? *grid : law_envelope_grid(law, m.x, gamma, points);
        auto gap_on = [&](const GridSpec& spec) {
            const auto gap = compare_densities(hs_density(p, m.x, gamma, spec), convolved_exact_law(law, m.x, gamma, spec));
            return Json{{"points", spec.axes.front().points}, {"tv", gap.tv}, {"sup", gap.sup}};
        };
        body["gap"] = gap_on(g);
        if (c.flag("refine")) body["refined"] = gap_on(g.refined());
    } else {
        GridSpec g;
        if (grid) {
            g = *grid;
        } else {
            // the Gaussian envelope is for gamma = 1/2; the variable shrinks by n^{gamma - 1/2}
            g = gaussian_envelope_grid(p.phase(), m, points);
            const double shrink = std::pow(static_cast<double>(p.n), gamma - 0.5);
            for (auto& axis : g.axes) {
                axis.lo *= shrink;
                axis.hi *= shrink;
            }
        }
        const auto d = hs_density(p, m.x, gamma, g);
        const auto fit = quartic_shape_fit(g.axes[0], axis_marginal(d, 0));
        body["axis0_quartic_fit"] = {{"c0", fit.c0}, {"c4", fit.c4}, {"r_squared", fit.r_squared}, {"points", fit.points}};
    }
    body["center"] = vec(m.x);
    r.summary = body;
    r.artifacts.push_back(json_artifact(c, body));
    return r;
}

}  // namespace

RunResult run_experiment(const Config& config) {
    const auto& s = config.subcommand();
    config.threads();
    config.seed();
    if (s == "phase-report") return phase_report(config);
    if (s == "exact-law") return exact_law_cmd(config);
    if (s == "sample") return sample_cmd(config);
    if (s == "clt-rate") return clt_rate(config);
    if (s == "stein-bounds") return stein_bounds(config);
    if (s == "critical-rate") return critical_rate(config);
    if (s == "hs-check") return hs_check(config);
    throw ConfigError("unknown subcommand '" + s + "'");
}

}  // namespace cwp::lab

#pragma once

// Batch runs and run-set comparison behind the command-line tool.
//
// `run` writes into its output directory:
//   <algo>_seed<S>.<fmt>          one platform row per step
//   <algo>_seed<S>_cohorts.<fmt>  one row per cohort per step
//   summary.<fmt>                 convergence distribution across seeds
//   run.json                      manifest read back by `compare`
//
// Metric columns, in order:
//   step, cohort_id, score_delta_pct, impressions_delta_pct,
//   lambda_1 .. lambda_N, tr_length, converged_flag
// cohort_id is "platform" on platform rows, where tr_length is the
// volume-weighted mean edge length (1 when the algorithm has no regions).

#include "ctrcbo/config.hpp"
#include "ctrcbo/optimizer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctrcbo {

enum class OutputFormat { Csv, Json };

inline OutputFormat parse_format(std::string_view s) {
    if (s == "csv") return OutputFormat::Csv;
    if (s == "json") return OutputFormat::Json;
    throw std::invalid_argument("unknown format '" + std::string(s) + "'");
}

inline std::string_view extension(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

struct RunManifest {
    std::string config_path;
    Algorithm algorithm = Algorithm::Ctrcbo;
    std::vector<std::uint64_t> seeds;  // empty: use the config's seeds
    std::filesystem::path out_dir;
    OutputFormat format = OutputFormat::Csv;
};

struct MetricRow {
    std::size_t step = 0;
    std::string cohort_id;
    double score_delta_pct = 0.0;
    double impressions_delta_pct = 0.0;
    std::vector<double> lambda;
    double tr_length = 1.0;
    bool converged = false;
};

namespace detail {

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace detail

inline std::vector<std::string> metric_columns(std::size_t n_constraints) {
    std::vector<std::string> cols{"step", "cohort_id", "score_delta_pct", "impressions_delta_pct"};
    for (std::size_t i = 1; i <= n_constraints; ++i) cols.push_back("lambda_" + std::to_string(i));
    cols.push_back("tr_length");
    cols.push_back("converged_flag");
    return cols;
}

/// Platform rows (one per step) and cohort rows (K per step).
inline std::pair<std::vector<MetricRow>, std::vector<MetricRow>> metric_rows(const RunResult& r,
                                                                            const Eigen::VectorXd& weights) {
    std::vector<MetricRow> platform;
    std::vector<MetricRow> cohorts;
    const auto& log = r.log;
    for (std::size_t t = 0; t < log.steps(); ++t) {
        const bool conv = r.steps_to_convergence && t + 1 >= *r.steps_to_convergence;
        std::vector<double> lambda(log.duals[t].data(), log.duals[t].data() + log.duals[t].size());
        double tr_mean = 0.0;
        for (std::size_t k = 0; k < log.cohorts.size(); ++k) {
            tr_mean += weights[static_cast<Eigen::Index>(k)] * log.tr_lengths[t][k];
            const auto& e = log.cohorts[k][t];
            cohorts.push_back({t + 1, std::to_string(k), e.outcome.score_delta, e.outcome.impressions_delta, lambda,
                               log.tr_lengths[t][k], conv});
        }
        platform.push_back({t + 1, "platform", log.platform[t].score_delta, log.platform[t].impressions_delta, lambda,
                            tr_mean, conv});
    }
    return {std::move(platform), std::move(cohorts)};
}

inline void write_metrics(std::ostream& os, const std::vector<MetricRow>& rows, std::size_t n_constraints,
                          OutputFormat format) {
    const auto cols = metric_columns(n_constraints);
    if (format == OutputFormat::Csv) {
        for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
        os << "\n";
        for (const auto& r : rows) {
            os << r.step << "," << r.cohort_id << "," << detail::fmt_double(r.score_delta_pct) << ","
               << detail::fmt_double(r.impressions_delta_pct);
            for (double l : r.lambda) os << "," << detail::fmt_double(l);
            os << "," << detail::fmt_double(r.tr_length) << "," << (r.converged ? 1 : 0) << "\n";
        }
        return;
    }
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json o;
        o["step"] = r.step;
        o["cohort_id"] = r.cohort_id;
        o["score_delta_pct"] = r.score_delta_pct;
        o["impressions_delta_pct"] = r.impressions_delta_pct;
        for (std::size_t i = 0; i < r.lambda.size(); ++i) o["lambda_" + std::to_string(i + 1)] = r.lambda[i];
        o["tr_length"] = r.tr_length;
        o["converged_flag"] = r.converged ? 1 : 0;
        arr.push_back(std::move(o));
    }
    os << arr.dump(2) << "\n";
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

inline double parse_cell(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    return std::stod(s);
}

}  // namespace detail

inline std::vector<MetricRow> read_metrics(const std::filesystem::path& path, std::size_t n_constraints,
                                           OutputFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics file " + path.string());
    std::vector<MetricRow> rows;
    const auto cols = metric_columns(n_constraints);
    if (format == OutputFormat::Csv) {
        std::string line;
        std::getline(in, line);
        if (detail::split_csv_line(line) != cols) throw std::runtime_error("unexpected header in " + path.string());
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto cells = detail::split_csv_line(line);
            if (cells.size() != cols.size()) throw std::runtime_error("ragged row in " + path.string());
            MetricRow r;
            r.step = std::stoul(cells[0]);
            r.cohort_id = cells[1];
            r.score_delta_pct = detail::parse_cell(cells[2]);
            r.impressions_delta_pct = detail::parse_cell(cells[3]);
            for (std::size_t i = 0; i < n_constraints; ++i) r.lambda.push_back(detail::parse_cell(cells[4 + i]));
            r.tr_length = detail::parse_cell(cells[4 + n_constraints]);
            r.converged = cells[5 + n_constraints] == "1";
            rows.push_back(std::move(r));
        }
        return rows;
    }
    const auto arr = nlohmann::json::parse(in);
    for (const auto& o : arr) {
        MetricRow r;
        r.step = o.at("step").get<std::size_t>();
        r.cohort_id = o.at("cohort_id").get<std::string>();
        r.score_delta_pct = o.at("score_delta_pct").get<double>();
        r.impressions_delta_pct = o.at("impressions_delta_pct").get<double>();
        for (std::size_t i = 1; i <= n_constraints; ++i) r.lambda.push_back(o.at("lambda_" + std::to_string(i)).get<double>());
        r.tr_length = o.at("tr_length").get<double>();
        r.converged = o.at("converged_flag").get<int>() == 1;
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Median with missing values ordered last; none when the median lands on
/// a missing value.
inline std::optional<double> median_steps(std::vector<std::optional<std::size_t>> steps) {
    if (steps.empty()) return std::nullopt;
    std::vector<double> v;
    for (const auto& s : steps) v.push_back(s ? static_cast<double>(*s) : std::numeric_limits<double>::infinity());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double m = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    if (!std::isfinite(m)) return std::nullopt;
    return m;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ConvergenceSummary {
    std::string algorithm;
    std::size_t runs = 0;
    std::size_t converged = 0;
    std::optional<double> min_steps;
    std::optional<double> median_steps;
    std::optional<double> max_steps;
    std::vector<double> median_time_average_violation;
    double median_regret = 0.0;

    [[nodiscard]] double convergence_rate() const {
        return runs ? static_cast<double>(converged) / static_cast<double>(runs) : 0.0;
    }
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::optional<std::size_t> steps_to_convergence;
    std::vector<double> time_average_violation;
    double regret = 0.0;
};

inline ConvergenceSummary summarize(std::string algorithm, const std::vector<SeedOutcome>& outcomes) {
    ConvergenceSummary s;
    s.algorithm = std::move(algorithm);
    s.runs = outcomes.size();
    std::vector<std::optional<std::size_t>> steps;
    std::vector<double> regrets;
    for (const auto& o : outcomes) {
        steps.push_back(o.steps_to_convergence);
        regrets.push_back(o.regret);
        if (o.steps_to_convergence) {
            ++s.converged;
            const double v = static_cast<double>(*o.steps_to_convergence);
            s.min_steps = s.min_steps ? std::min(*s.min_steps, v) : v;
            s.max_steps = s.max_steps ? std::max(*s.max_steps, v) : v;
        }
    }
    s.median_steps = median_steps(steps);
    s.median_regret = median_of(regrets);
    if (!outcomes.empty()) {
        for (std::size_t i = 0; i < outcomes.front().time_average_violation.size(); ++i) {
            std::vector<double> col;
            for (const auto& o : outcomes) col.push_back(o.time_average_violation.at(i));
            s.median_time_average_violation.push_back(median_of(col));
        }
    }
    return s;
}

namespace detail {

inline std::string opt_str(const std::optional<double>& v) { return v ? fmt_double(*v) : "none"; }

inline nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json("none");
}

inline std::vector<std::string> summary_columns(std::size_t n_constraints) {
    std::vector<std::string> cols{"algorithm", "runs", "converged", "convergence_rate", "min_steps", "median_steps",
                                  "max_steps"};
    for (std::size_t i = 1; i <= n_constraints; ++i) cols.push_back("median_time_avg_violation_" + std::to_string(i));
    cols.push_back("median_regret");
    return cols;
}

}  // namespace detail

inline void write_summaries(std::ostream& os, const std::vector<ConvergenceSummary>& rows, std::size_t n_constraints,
                            OutputFormat format) {
    if (format == OutputFormat::Csv) {
        const auto cols = detail::summary_columns(n_constraints);
        for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
        os << "\n";
        for (const auto& s : rows) {
            os << s.algorithm << "," << s.runs << "," << s.converged << "," << detail::fmt_double(s.convergence_rate())
               << "," << detail::opt_str(s.min_steps) << "," << detail::opt_str(s.median_steps) << ","
               << detail::opt_str(s.max_steps);
            for (double v : s.median_time_average_violation) os << "," << detail::fmt_double(v);
            os << "," << detail::fmt_double(s.median_regret) << "\n";
        }
        return;
    }
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : rows) {
        nlohmann::ordered_json o;
        o["algorithm"] = s.algorithm;
        o["runs"] = s.runs;
        o["converged"] = s.converged;
        o["convergence_rate"] = s.convergence_rate();
        o["min_steps"] = detail::opt_json(s.min_steps);
        o["median_steps"] = detail::opt_json(s.median_steps);
        o["max_steps"] = detail::opt_json(s.max_steps);
        for (std::size_t i = 0; i < s.median_time_average_violation.size(); ++i) {
            o["median_time_avg_violation_" + std::to_string(i + 1)] = s.median_time_average_violation[i];
        }
        o["median_regret"] = s.median_regret;
        arr.push_back(std::move(o));
    }
    os << arr.dump(2) << "\n";
}

inline std::string metrics_file_name(Algorithm a, std::uint64_t seed, OutputFormat f, bool cohorts = false) {
    return std::string(to_string(a)) + "_seed" + std::to_string(seed) + (cohorts ? "_cohorts." : ".") +
           std::string(extension(f));
}

/// Runs every seed and writes the run set. Returns 0 on success; on any
/// failure the files written so far are removed and 1 is returned.
inline int cmd_run(const RunManifest& manifest, std::ostream& diag) {
    namespace fs = std::filesystem;
    std::vector<fs::path> written;
    bool created_dir = false;
    auto open_out = [&](const fs::path& p) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + p.string());
        written.push_back(p);
        return f;
    };
    try {
        Experiment ex = load_experiment(manifest.config_path);
        if (!manifest.seeds.empty()) ex.config.seeds = manifest.seeds;
        ex.config.validate();
        if (manifest.out_dir.empty()) throw std::runtime_error("output directory not set");
        if (!fs::exists(manifest.out_dir)) {
            fs::create_directories(manifest.out_dir);
            created_dir = true;
        }
        const auto N = static_cast<std::size_t>(ex.env.constraint_count());
        const Eigen::VectorXd w = ex.env.weights();
        std::vector<SeedOutcome> outcomes;
        nlohmann::ordered_json results = nlohmann::ordered_json::array();
        for (std::uint64_t seed : ex.config.seeds) {
            const RunResult r = run_algorithm(manifest.algorithm, ex.config, ex.env, seed);
            const auto [platform, cohorts] = metric_rows(r, w);
            {
                auto f = open_out(manifest.out_dir / metrics_file_name(manifest.algorithm, seed, manifest.format));
                write_metrics(f, platform, N, manifest.format);
            }
            {
                auto f = open_out(manifest.out_dir / metrics_file_name(manifest.algorithm, seed, manifest.format, true));
                write_metrics(f, cohorts, N, manifest.format);
            }
            SeedOutcome o{seed, r.steps_to_convergence,
                          std::vector<double>(r.time_average_violation.data(),
                                              r.time_average_violation.data() + r.time_average_violation.size()),
                          r.regret};
            nlohmann::ordered_json jr;
            jr["seed"] = seed;
            jr["converged"] = r.converged;
            jr["steps_to_convergence"] =
                r.steps_to_convergence ? nlohmann::ordered_json(*r.steps_to_convergence) : nlohmann::ordered_json();
            jr["time_average_violation"] = o.time_average_violation;
            jr["regret"] = r.regret;
            jr["steps_run"] = r.log.steps();
            results.push_back(std::move(jr));
            outcomes.push_back(std::move(o));
        }
        {
            auto f = open_out(manifest.out_dir / ("summary." + std::string(extension(manifest.format))));
            write_summaries(f, {summarize(std::string(to_string(manifest.algorithm)), outcomes)}, N, manifest.format);
        }
        nlohmann::ordered_json m;
        m["algorithm"] = std::string(to_string(manifest.algorithm));
        m["config_name"] = ex.name;
        m["config_version"] = ex.version;
        m["config_fingerprint"] = fingerprint(ex);
        m["format"] = std::string(extension(manifest.format));
        m["horizon"] = ex.config.horizon;
        m["score_target"] = ex.config.score_target;
        m["budgets"] = std::vector<double>(ex.env.budgets.data(), ex.env.budgets.data() + ex.env.budgets.size());
        m["seeds"] = ex.config.seeds;
        m["results"] = std::move(results);
        auto f = open_out(manifest.out_dir / "run.json");
        f << m.dump(2) << "\n";
        return 0;
    } catch (const std::exception& e) {
        diag << "run failed: " << e.what() << "\n";
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        if (created_dir) fs::remove(manifest.out_dir, ec);
        return 1;
    }
}

struct RunSet {
    std::filesystem::path dir;
    std::string algorithm;
    std::string fingerprint;
    OutputFormat format = OutputFormat::Csv;
    std::size_t horizon = 0;
    double score_target = 0.0;
    std::vector<double> budgets;
    std::vector<SeedOutcome> outcomes;
};

inline RunSet load_run_set(const std::filesystem::path& dir) {
    std::ifstream in(dir / "run.json");
    if (!in) throw std::runtime_error("no run.json in " + dir.string());
    const auto m = nlohmann::json::parse(in);
    RunSet rs;
    rs.dir = dir;
    rs.algorithm = m.at("algorithm").get<std::string>();
    rs.fingerprint = m.at("config_fingerprint").get<std::string>();
    rs.format = parse_format(m.at("format").get<std::string>());
    rs.horizon = m.at("horizon").get<std::size_t>();
    rs.score_target = m.at("score_target").get<double>();
    rs.budgets = m.at("budgets").get<std::vector<double>>();
    for (const auto& r : m.at("results")) {
        SeedOutcome o;
        o.seed = r.at("seed").get<std::uint64_t>();
        if (!r.at("steps_to_convergence").is_null()) o.steps_to_convergence = r.at("steps_to_convergence").get<std::size_t>();
        o.time_average_violation = r.at("time_average_violation").get<std::vector<double>>();
        o.regret = r.at("regret").get<double>();
        rs.outcomes.push_back(std::move(o));
    }
    return rs;
}

/// Per-step median over seeds of the best platform score seen so far on
/// steps within every budget; NaN until at least half the seeds have one.
inline std::vector<double> best_feasible_curve(const RunSet& rs) {
    std::vector<std::vector<double>> per_seed;
    std::size_t longest = 0;
    for (const auto& o : rs.outcomes) {
        const Algorithm a = parse_algorithm(rs.algorithm);
        const auto rows = read_metrics(rs.dir / metrics_file_name(a, o.seed, rs.format), rs.budgets.size(), rs.format);
        std::vector<double> curve;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& r : rows) {
            bool feasible = true;
            for (double b : rs.budgets) feasible = feasible && r.impressions_delta_pct <= b;
            if (feasible) best = std::max(best, r.score_delta_pct);
            curve.push_back(best);
        }
        longest = std::max(longest, curve.size());
        per_seed.push_back(std::move(curve));
    }
    std::vector<double> out;
    for (std::size_t t = 0; t < longest; ++t) {
        std::vector<double> col;
        for (const auto& c : per_seed) {
            // Early-stopped runs hold their last value.
            if (!c.empty()) col.push_back(c[std::min(t, c.size() - 1)]);
        }
        const double m = median_of(col);
        out.push_back(std::isfinite(m) ? m : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

struct ComparisonReport {
    std::vector<ConvergenceSummary> summaries;
    std::vector<std::vector<double>> curves;
    // median_steps[i] - median_steps[0], none when either is missing
    std::vector<std::optional<double>> median_difference;
};

inline ComparisonReport compare_run_sets(const std::vector<RunSet>& sets) {
    if (sets.size() < 2) throw std::invalid_argument("compare: need at least two run sets");
    for (const auto& s : sets) {
        if (s.fingerprint != sets.front().fingerprint) {
            throw std::invalid_argument("compare: run sets were produced from different configurations (" +
                                        sets.front().dir.string() + " vs " + s.dir.string() + ")");
        }
    }
    ComparisonReport rep;
    for (const auto& s : sets) {
        rep.summaries.push_back(summarize(s.algorithm, s.outcomes));
        rep.curves.push_back(best_feasible_curve(s));
    }
    for (const auto& s : rep.summaries) {
        const auto& base = rep.summaries.front().median_steps;
        rep.median_difference.push_back(s.median_steps && base ? std::optional<double>(*s.median_steps - *base)
                                                               : std::nullopt);
    }
    return rep;
}

/// Writes comparison.<fmt> and plot_<i>_<algo>.csv into out_dir and a
/// human-readable table to `report`.
inline int cmd_compare(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out_dir,
                       OutputFormat format, std::ostream& report, std::ostream& diag) {
    namespace fs = std::filesystem;
    try {
        std::vector<RunSet> sets;
        for (const auto& d : run_dirs) sets.push_back(load_run_set(d));
        const ComparisonReport rep = compare_run_sets(sets);
        fs::create_directories(out_dir);
        const std::size_t N = sets.front().budgets.size();
        {
            std::ofstream f(out_dir / ("comparison." + std::string(extension(format))), std::ios::binary);
            write_summaries(f, rep.summaries, N, format);
        }
        for (std::size_t i = 0; i < sets.size(); ++i) {
            std::ofstream f(out_dir / ("plot_" + std::to_string(i) + "_" + sets[i].algorithm + ".csv"), std::ios::binary);
            f << "step,best_feasible_score_pct\n";
            for (std::size_t t = 0; t < rep.curves[i].size(); ++t) {
                f << t + 1 << "," << detail::fmt_double(rep.curves[i][t]) << "\n";
            }
        }
        report << "algorithm  runs  converged  min  median  max  median_diff\n";
        for (std::size_t i = 0; i < sets.size(); ++i) {
            const auto& s = rep.summaries[i];
            report << s.algorithm << "  " << s.runs << "  " << s.converged << "  " << detail::opt_str(s.min_steps)
                   << "  " << detail::opt_str(s.median_steps) << "  " << detail::opt_str(s.max_steps) << "  "
                   << detail::opt_str(rep.median_difference[i]) << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        diag << "compare failed: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace ctrcbo

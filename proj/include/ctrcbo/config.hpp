#pragma once

// Experiment files: INI sections [experiment], [trust_region], [surrogate],
// [environment], [context] and one [cohortK] per cohort, K = 0..n-1.
// Vectors are comma-separated. Direction vectors are normalized on load.

#include "ctrcbo/optimizer.hpp"
#include "ctrcbo/simulator.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctrcbo {

struct Experiment {
    std::string name = "custom";
    std::string version = "1";
    ExperimentConfig config;
    SyntheticEnvironment env;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<double> parse_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = item.find_last_not_of(" \t");
        const std::string tok = item.substr(b, e - b + 1);
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw ConfigError("config: '" + key + "' has a non-numeric entry '" + tok + "'");
        }
        if (used != tok.size()) throw ConfigError("config: '" + key + "' has a non-numeric entry '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& xs) {
    return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

class Section {
public:
    Section(const boost::property_tree::ptree& root, std::string name) : name_(std::move(name)) {
        const auto child = root.get_child_optional(name_);
        if (child) tree_ = *child;
    }

    [[nodiscard]] bool has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }

    template <class T>
    T get(const std::string& key, T fallback) const {
        const auto raw = tree_.get_optional<std::string>(key);
        if (!raw) return fallback;
        if constexpr (std::is_same_v<T, std::string>) {
            return *raw;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (*raw == "true" || *raw == "1") return true;
            if (*raw == "false" || *raw == "0") return false;
            throw ConfigError("config: [" + name_ + "] " + key + " must be true or false");
        } else {
            const auto v = tree_.get_optional<T>(key);
            if (!v) throw ConfigError("config: [" + name_ + "] " + key + " has invalid value '" + *raw + "'");
            return *v;
        }
    }

    [[nodiscard]] std::vector<double> list(const std::string& key, std::vector<double> fallback) const {
        const auto raw = tree_.get_optional<std::string>(key);
        return raw ? parse_list(*raw, key) : fallback;
    }

    [[nodiscard]] std::vector<double> required_list(const std::string& key) const {
        const auto raw = tree_.get_optional<std::string>(key);
        if (!raw) throw ConfigError("config: [" + name_ + "] missing " + key);
        return parse_list(*raw, key);
    }

private:
    std::string name_;
    boost::property_tree::ptree tree_;
};

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string join_numbers(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_number(v[i]);
    }
    return out;
}

inline std::string join_numbers(const std::vector<double>& v) { return join_numbers(to_vector(v)); }

}  // namespace detail

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = item.find_last_not_of(" \t");
        const std::string tok = item.substr(b, e - b + 1);
        const auto dash = tok.find('-');
        try {
            std::size_t used = 0;
            if (dash != std::string::npos && dash > 0) {
                // inclusive range a-b
                const auto lo = std::stoull(tok.substr(0, dash));
                const auto hi = std::stoull(tok.substr(dash + 1), &used);
                if (used != tok.size() - dash - 1 || hi < lo) throw std::invalid_argument(tok);
                for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
            } else {
                const auto s = std::stoull(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
                seeds.push_back(s);
            }
        } catch (const std::exception&) {
            throw ConfigError("bad seed entry '" + tok + "'");
        }
    }
    if (seeds.empty()) throw ConfigError("seed list is empty");
    return seeds;
}

inline Experiment parse_experiment(std::istream& in) {
    boost::property_tree::ptree root;
    try {
        boost::property_tree::ini_parser::read_ini(in, root);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    using detail::Section;
    Experiment ex;
    auto& c = ex.config;
    auto& env = ex.env;

    const Section exp(root, "experiment");
    ex.name = exp.get<std::string>("name", ex.name);
    ex.version = exp.get<std::string>("version", ex.version);
    c.horizon = exp.get<std::size_t>("horizon", c.horizon);
    c.convergence_window = exp.get<std::size_t>("convergence_window", c.convergence_window);
    c.score_target = exp.get<double>("score_target", c.score_target);
    if (exp.has("seeds")) c.seeds = parse_seed_list(exp.get<std::string>("seeds", ""));
    c.n_candidates = exp.get<std::size_t>("n_candidates", c.n_candidates);
    c.beta = exp.get<double>("beta", c.beta);
    c.epsilon = exp.get<double>("epsilon", c.epsilon);
    c.eta = exp.get<double>("eta", c.eta);
    c.early_stop = exp.get<bool>("early_stop", c.early_stop);
    c.proxy_holdout = exp.get<std::size_t>("proxy_holdout", c.proxy_holdout);

    const Section tr(root, "trust_region");
    c.trust_region.length_init = tr.get<double>("length_init", c.trust_region.length_init);
    c.trust_region.length_min = tr.get<double>("length_min", c.trust_region.length_min);
    c.trust_region.length_max = tr.get<double>("length_max", c.trust_region.length_max);
    c.trust_region.tau_succ = tr.get<int>("tau_succ", c.trust_region.tau_succ);
    c.trust_region.tau_fail = tr.get<int>("tau_fail", c.trust_region.tau_fail);

    const Section sg(root, "surrogate");
    auto& s = c.surrogate;
    s.sigmoid_slopes = sg.list("sigmoid_slopes", s.sigmoid_slopes);
    s.sigmoid_biases = sg.list("sigmoid_biases", s.sigmoid_biases);
    s.rbf_lengthscales = sg.list("rbf_lengthscales", s.rbf_lengthscales);
    s.signal_scales = sg.list("signal_scales", s.signal_scales);
    s.noise_grid = sg.list("noise_grid", s.noise_grid);
    s.hyper_period = sg.get<std::size_t>("hyper_period", s.hyper_period);
    s.hyper_max_points = sg.get<std::size_t>("hyper_max_points", s.hyper_max_points);

    const Section en(root, "environment");
    env.name = ex.name;
    env.version = ex.version;
    env.policy_dim = en.get<Eigen::Index>("policy_dim", env.policy_dim);
    env.bounds.lower = detail::to_vector(en.list("lower", std::vector<double>(static_cast<std::size_t>(env.policy_dim), 0.0)));
    env.bounds.upper = detail::to_vector(en.list("upper", std::vector<double>(static_cast<std::size_t>(env.policy_dim), 1.0)));
    env.budgets = detail::to_vector(en.required_list("budgets"));
    const auto n_cohorts = en.get<std::size_t>("cohorts", 0);
    if (n_cohorts == 0) throw ConfigError("config: [environment] cohorts must be >= 1");

    const Section cx(root, "context");
    env.context.period = cx.get<double>("period", env.context.period);
    env.context.ar_coef = cx.get<double>("ar_coef", env.context.ar_coef);
    env.context.shock_sd = cx.get<double>("shock_sd", env.context.shock_sd);
    env.context.shock_scale = cx.get<double>("shock_scale", env.context.shock_scale);

    env.cohorts.clear();
    for (std::size_t k = 0; k < n_cohorts; ++k) {
        const std::string sec = "cohort" + std::to_string(k);
        if (!root.get_child_optional(sec)) throw ConfigError("config: missing section [" + sec + "]");
        const Section co(root, sec);
        CohortSpec spec;
        spec.id = k;
        spec.name = co.get<std::string>("name", sec);
        spec.volume_weight = co.get<double>("weight", -1.0);
        spec.saturation = co.get<double>("saturation", spec.saturation);
        spec.rate = co.get<double>("rate", spec.rate);
        spec.impression_gain = co.get<double>("impression_gain", spec.impression_gain);
        spec.score_noise_sd = co.get<double>("score_noise_sd", 0.0);
        spec.impressions_noise_sd = co.get<double>("impressions_noise_sd", 0.0);
        spec.context_sensitivity = detail::to_vector(co.required_list("context_sensitivity"));
        spec.score_direction = detail::to_vector(co.required_list("score_direction"));
        spec.impression_direction = detail::to_vector(co.required_list("impression_direction"));
        for (auto* dir : {&spec.score_direction, &spec.impression_direction}) {
            const double norm = dir->norm();
            if (!(norm > 0.0)) throw ConfigError("config: [" + sec + "] direction vectors must be non-zero");
            // Unit vectors are kept bit-for-bit so canonical forms reload unchanged.
            if (std::abs(norm - 1.0) > 1e-12) *dir /= norm;
        }
        env.cohorts.push_back(std::move(spec));
    }

    try {
        c.validate();
        env.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return ex;
}

inline Experiment load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse_experiment(in);
}

/// Canonical text form of everything that influences a run except the seed
/// list; equal strings mean comparable runs.
inline std::string canonical_form(const Experiment& ex) {
    using detail::format_number;
    using detail::join_numbers;
    const auto& c = ex.config;
    const auto& e = ex.env;
    std::ostringstream os;
    os << "[experiment]\nname = " << ex.name << "\nversion = " << ex.version << "\nhorizon = " << c.horizon
       << "\nconvergence_window = " << c.convergence_window << "\nscore_target = " << format_number(c.score_target)
       << "\nn_candidates = " << c.n_candidates << "\nbeta = " << format_number(c.beta)
       << "\nepsilon = " << format_number(c.epsilon) << "\neta = " << format_number(c.eta)
       << "\nearly_stop = " << (c.early_stop ? "true" : "false") << "\nproxy_holdout = " << c.proxy_holdout << "\n";
    os << "[trust_region]\nlength_init = " << format_number(c.trust_region.length_init)
       << "\nlength_min = " << format_number(c.trust_region.length_min)
       << "\nlength_max = " << format_number(c.trust_region.length_max) << "\ntau_succ = " << c.trust_region.tau_succ
       << "\ntau_fail = " << c.trust_region.tau_fail << "\n";
    os << "[surrogate]\nsigmoid_slopes = " << join_numbers(c.surrogate.sigmoid_slopes)
       << "\nsigmoid_biases = " << join_numbers(c.surrogate.sigmoid_biases)
       << "\nrbf_lengthscales = " << join_numbers(c.surrogate.rbf_lengthscales)
       << "\nsignal_scales = " << join_numbers(c.surrogate.signal_scales)
       << "\nnoise_grid = " << join_numbers(c.surrogate.noise_grid) << "\nhyper_period = " << c.surrogate.hyper_period
       << "\nhyper_max_points = " << c.surrogate.hyper_max_points << "\n";
    os << "[environment]\npolicy_dim = " << e.policy_dim << "\nlower = " << join_numbers(e.bounds.lower)
       << "\nupper = " << join_numbers(e.bounds.upper) << "\nbudgets = " << join_numbers(e.budgets)
       << "\ncohorts = " << e.cohorts.size() << "\n";
    os << "[context]\nperiod = " << format_number(e.context.period) << "\nar_coef = " << format_number(e.context.ar_coef)
       << "\nshock_sd = " << format_number(e.context.shock_sd)
       << "\nshock_scale = " << format_number(e.context.shock_scale) << "\n";
    for (std::size_t k = 0; k < e.cohorts.size(); ++k) {
        const auto& co = e.cohorts[k];
        os << "[cohort" << k << "]\nname = " << co.name << "\nweight = " << format_number(co.volume_weight)
           << "\nsaturation = " << format_number(co.saturation) << "\nrate = " << format_number(co.rate)
           << "\nimpression_gain = " << format_number(co.impression_gain)
           << "\nscore_noise_sd = " << format_number(co.score_noise_sd)
           << "\nimpressions_noise_sd = " << format_number(co.impressions_noise_sd)
           << "\ncontext_sensitivity = " << join_numbers(co.context_sensitivity)
           << "\nscore_direction = " << join_numbers(co.score_direction)
           << "\nimpression_direction = " << join_numbers(co.impression_direction) << "\n";
    }
    return os.str();
}

/// FNV-1a over the canonical form.
inline std::string fingerprint(const Experiment& ex) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical_form(ex)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// The canonical benchmark as compiled in; configs/benchmark_3cohort.ini
/// loads to the same canonical form.
inline Experiment benchmark_experiment() {
    Experiment ex;
    ex.name = "benchmark_3cohort";
    ex.version = "1";
    ex.env = benchmark_env_3cohort();
    ex.config.seeds.clear();
    for (std::uint64_t s = 1; s <= 20; ++s) ex.config.seeds.push_back(s);
    return ex;
}

}  // namespace ctrcbo

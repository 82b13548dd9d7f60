// ctrcbo: run, compare and check constrained trust-region BO experiments.
//
// Every flag can also come from the environment; an explicit flag wins.
//   CTRCBO_CONFIG  --config
//   CTRCBO_SEEDS   --seeds
//   CTRCBO_ALGO    --algo
//   CTRCBO_OUT     --out
//   CTRCBO_FORMAT  --format

#include "acceptance/suite.hpp"
#include "ctrcbo/ctrcbo.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

struct RunFlags {
    std::string config;
    std::string seeds;
    std::string algo = "ctrcbo";
    std::string out;
    std::string format = "csv";
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config, "experiment file")->envname("CTRCBO_CONFIG");
    cmd->add_option("--seeds", f.seeds, "seed list, e.g. 1,2,3 or 1-20 (default: from config)")->envname("CTRCBO_SEEDS");
    cmd->add_option("--algo", f.algo, "ctrcbo | cbo | random")
        ->envname("CTRCBO_ALGO")
        ->check(CLI::IsMember({"ctrcbo", "cbo", "random"}));
    cmd->add_option("--out", f.out, "output directory")->envname("CTRCBO_OUT");
    cmd->add_option("--format", f.format, "csv | json")->envname("CTRCBO_FORMAT")->check(CLI::IsMember({"csv", "json"}));
}

std::string default_config() { return CTRCBO_SOURCE_DIR "/configs/benchmark_3cohort.ini"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained trust-region Bayesian optimization for ad-load policies"};
    app.require_subcommand(1);

    RunFlags run;
    auto* run_cmd = app.add_subcommand("run", "run one algorithm over a seed list");
    add_run_flags(run_cmd, run);
    run_cmd->get_option("--config")->required();
    run_cmd->get_option("--out")->required();

    std::vector<std::string> run_dirs;
    std::string cmp_out;
    std::string cmp_format = "csv";
    auto* cmp_cmd = app.add_subcommand("compare", "compare completed run directories");
    cmp_cmd->add_option("run_dirs", run_dirs, "directories written by `run`")->required()->expected(2, -1);
    cmp_cmd->add_option("--out", cmp_out, "report directory")->envname("CTRCBO_OUT")->required();
    cmp_cmd->add_option("--format", cmp_format, "csv | json")
        ->envname("CTRCBO_FORMAT")
        ->check(CLI::IsMember({"csv", "json"}));

    std::string acc_config;
    auto* acc_cmd = app.add_subcommand("accept", "run the acceptance suite");
    acc_cmd->add_option("--config", acc_config, "benchmark experiment file")->envname("CTRCBO_CONFIG");

    std::string scan_config;
    std::string scan_out;
    std::size_t scan_points = 50;
    auto* scan_cmd = app.add_subcommand("gridscan", "lattice scan certifying the benchmark target is reachable");
    scan_cmd->add_option("--config", scan_config, "experiment file")->envname("CTRCBO_CONFIG");
    scan_cmd->add_option("--points", scan_points, "lattice points per dimension");
    scan_cmd->add_option("--out", scan_out, "write the result as JSON here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            ctrcbo::RunManifest m;
            m.config_path = run.config;
            m.algorithm = ctrcbo::parse_algorithm(run.algo);
            if (!run.seeds.empty()) m.seeds = ctrcbo::parse_seed_list(run.seeds);
            m.out_dir = run.out;
            m.format = ctrcbo::parse_format(run.format);
            return ctrcbo::cmd_run(m, std::cerr);
        }
        if (*cmp_cmd) {
            std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
            return ctrcbo::cmd_compare(dirs, cmp_out, ctrcbo::parse_format(cmp_format), std::cout, std::cerr);
        }
        if (*acc_cmd) {
            acceptance::Options opt;
            opt.config_path = acc_config.empty() ? default_config() : acc_config;
            opt.scratch_dir = std::filesystem::temp_directory_path() / "ctrcbo_accept";
            return acceptance::run_acceptance(opt, std::cout) ? 0 : 1;
        }
        if (*scan_cmd) {
            const auto ex = ctrcbo::load_experiment(scan_config.empty() ? default_config() : scan_config);
            const auto g = ctrcbo::grid_scan_shared_policy(ex.env, ex.config.score_target, scan_points);
            nlohmann::ordered_json j;
            j["config_name"] = ex.name;
            j["config_version"] = ex.version;
            j["config_fingerprint"] = ctrcbo::fingerprint(ex);
            j["points_per_dim"] = g.points_per_dim;
            j["score_target"] = ex.config.score_target;
            j["feasible_count"] = g.feasible_count;
            const auto& th = g.best_policy.values();
            j["best_policy"] = std::vector<double>(th.data(), th.data() + th.size());
            j["best_platform_score_delta"] = g.best_platform.score_delta;
            j["best_platform_impressions_delta"] = g.best_platform.impressions_delta;
            j["score_margin"] = g.score_margin;
            if (scan_out.empty()) {
                std::cout << j.dump(2) << "\n";
            } else {
                std::ofstream(scan_out) << j.dump(2) << "\n";
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

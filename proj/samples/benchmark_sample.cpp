// Runs CTRCBO and the pooled-GP baseline on the builtin three-cohort
// benchmark for a few seeds and prints steps to convergence.

#include "ctrcbo/ctrcbo.hpp"

#include <iostream>

int main() {
    auto ex = ctrcbo::benchmark_experiment();
    ex.config.early_stop = true;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        for (auto algo : {ctrcbo::Algorithm::Ctrcbo, ctrcbo::Algorithm::NaiveCbo}) {
            const auto r = ctrcbo::run_algorithm(algo, ex.config, ex.env, seed);
            std::cout << ctrcbo::to_string(algo) << " seed " << seed << ": ";
            if (r.steps_to_convergence) {
                std::cout << "converged at step " << *r.steps_to_convergence;
            } else {
                std::cout << "not converged in " << r.log.steps() << " steps";
            }
            const auto& last = r.log.platform.back();
            std::cout << " (score " << last.score_delta << "%, impressions " << last.impressions_delta << "%)\n";
        }
    }
}

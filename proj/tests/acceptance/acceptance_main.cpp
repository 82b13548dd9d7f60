#include "acceptance/suite.hpp"

#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
    acceptance::Options opt;
    opt.config_path = argc > 1 ? argv[1] : CTRCBO_SOURCE_DIR "/configs/benchmark_3cohort.ini";
    opt.scratch_dir = std::filesystem::temp_directory_path() / "ctrcbo_acceptance";
    try {
        return acceptance::run_acceptance(opt, std::cout) ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "acceptance: " << e.what() << "\n";
        return 2;
    }
}

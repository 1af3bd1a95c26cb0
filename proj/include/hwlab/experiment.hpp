#pragma once

#include <string>

#include "hwlab/config.hpp"

namespace hwlab {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentOverrides {
    std::string out_dir;   // empty: from config (default "out")
    long long seed = -1;   // negative: from config
    int threads = 0;       // 0: config, then HWLAB_THREADS env, then 1
    bool check = false;    // nonzero exit when an in-config acceptance check fails
};

struct ExperimentResult {
    int exit_code = 0;
    std::string out_dir;
    bool checks_requested = false;
    bool checks_passed = true;
};

ExperimentResult run_experiment(const ConfigDoc& doc, const ExperimentOverrides& ov = {});
ExperimentResult run_experiment_file(const std::string& config_path,
                                     const ExperimentOverrides& ov = {});

}  // namespace hwlab

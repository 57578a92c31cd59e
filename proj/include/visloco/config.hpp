#pragma once

#include "visloco/env.hpp"
#include "visloco/phase1.hpp"
#include "visloco/phase2.hpp"
#include "visloco/policy.hpp"
#include "visloco/terrain.hpp"

#include <optional>
#include <string>

namespace visloco::config {

struct EvalSettings {
    int episodes_per_terrain = 8;
    double episode_seconds = 100.0;
    std::vector<int> columns;  // empty: all grid columns
    double command = 0.35;
};

// Declarative experiment description. Everything has a default; a config file
// overrides fields selectively and is schema-checked on load.
struct ExperimentConfig {
    std::string architecture = "monolithic";  // or "rma"
    std::string baseline = "none";            // "blind", "noisy"
    std::uint64_t seed = 1;

    terrain::GridConfig grid = default_grid();
    policy::PolicyDims dims;

    long phase1_env_steps = 2000000;
    phase1::TrainerConfig phase1;

    int phase2_iterations = 2000;
    phase2::DistillConfig phase2;

    EnvConfig env;
    std::string work_mode = "power";  // or "torque_angle"
    EvalSettings eval;

    static terrain::GridConfig default_grid();
    void validate() const;

    // Environment configuration for a given role.
    EnvConfig phase1_env() const;
    EnvConfig phase2_env() const;   // student sensing channels enabled
    EnvConfig eval_env(bool student_channels) const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string to_json_text(const ExperimentConfig& cfg);  // canonical, defaults filled
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace visloco::config

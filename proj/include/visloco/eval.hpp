#pragma once

#include "visloco/config.hpp"
#include "visloco/env.hpp"
#include "visloco/terrain.hpp"

#include <functional>
#include <string>
#include <vector>

namespace visloco::eval {

using ActFn = std::function<Vec(const policy::PolicyObs&, Vec&)>;

struct EvalResult {
    terrain::TerrainKind kind = terrain::TerrainKind::Flat;
    int episodes = 0;
    double mean_x_displacement = 0.0;  // meters, forward axis, floored at 0
    double mean_time_to_fall = 0.0;    // seconds, capped at the episode length
    double success_rate = 0.0;         // reached the far end without falling
    std::uint64_t seed = 0;
    std::string policy_id;
};

// Deterministic given the seed: one result per grid row, aggregated over the
// requested difficulty columns.
std::vector<EvalResult> eval_policy(const ActFn& act, int hidden_dim, bool student_channels,
                                    const EnvConfig& env_cfg, const terrain::TerrainGrid& grid,
                                    const config::EvalSettings& settings, std::uint64_t seed,
                                    const std::string& policy_id);

void write_eval_csv(const std::string& path, const std::vector<EvalResult>& results);
std::vector<EvalResult> read_eval_csv(const std::string& path);

// Table-style comparison: methods x terrains x two metrics, totals row,
// ranking by total displacement.
std::string compare_methods(const std::vector<std::vector<EvalResult>>& methods);

}  // namespace visloco::eval

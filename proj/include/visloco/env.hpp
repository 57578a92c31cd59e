#pragma once

#include "visloco/observe.hpp"
#include "visloco/policy.hpp"
#include "visloco/rewards.hpp"
#include "visloco/sim.hpp"
#include "visloco/terrain.hpp"

#include <array>
#include <fstream>
#include <memory>
#include <optional>

namespace visloco {

enum class Baseline { None, Blind, Noisy };

Baseline baseline_from_name(const std::string& name);
const char* baseline_name(Baseline b);

// Normalized privileged vector e_t: [COM offset, friction, motor strength,
// added mass], each mapped affinely from its randomization range to [-1, 1].
Vec privileged_vector(const sim::WalkerParams& params, const sim::RandomizationRanges& ranges);

struct EnvConfig {
    sim::SimConfig sim;
    sim::RandomizationRanges rand;
    bool randomize_dynamics = true;
    sim::PushSchedule push;
    bool pushes = true;
    obs::ScanLayout layout = obs::ScanLayout::make_default();
    obs::NoiseTable noise;  // filled by finalize()
    bool obs_noise = true;
    obs::DepthCamera camera;
    obs::DepthPreprocess depth_pp;
    obs::LatencyConfig scan_latency;   // height-map update frequency/latency
    obs::LatencyConfig depth_latency;
    obs::ElevNoiseSpec elev_noise;
    rewards::RewardConfig reward;
    double episode_seconds = 20.0;
    Baseline baseline = Baseline::None;
    bool enable_depth = false;      // run the depth pipeline (phase 2)
    bool enable_elevation = false;  // corrupted elevation channel (noisy student)
    double init_jitter = 1.0;
    double depth_norm_center = 1.5;  // student depth normalization
    double depth_norm_scale = 1.5;
    std::optional<double> command_override;  // evaluation: fixed forward command

    void finalize() { noise = obs::NoiseTable::make_default(sim); }
};

struct StepResult {
    rewards::RewardBreakdown reward;
    bool done = false;
    bool terminal = false;  // fell/collided/fault (timeout is done but not terminal)
    sim::Termination kind = sim::Termination::Alive;
    bool fault = false;
};

// One walker on one terrain cell: dynamics, observation pipelines, rewards
// and episode bookkeeping. Instances share no mutable state.
class Env {
public:
    Env(const EnvConfig& cfg, std::uint64_t seed);

    void set_cell(const terrain::Heightfield* hf, terrain::TerrainKind kind, int row, int col);
    void reset();

    // Teacher channel: proprio + scandots (+ privileged vector).
    policy::PolicyObs observe_teacher();
    // Student channel: proprio + depth / corrupted elevation / zeros.
    policy::PolicyObs observe_student();

    StepResult step(const Vec& action);

    const sim::WalkerState& state() const { return st_; }
    const sim::WalkerParams& walker_params() const { return params_; }
    const rewards::Command& command() const { return cmd_; }
    const EnvConfig& config() const { return cfg_; }
    terrain::TerrainKind kind() const { return kind_; }
    int row() const { return row_; }
    int col() const { return col_; }
    double spawn_x() const { return spawn_x_; }
    double episode_distance() const { return st_.x - spawn_x_; }
    double episode_return() const { return episode_return_; }
    int episode_steps() const { return episode_steps_; }
    double episode_time() const { return episode_steps_ * cfg_.sim.dt_control(); }
    int max_episode_steps() const {
        return static_cast<int>(cfg_.episode_seconds * cfg_.sim.control_hz);
    }
    // Demotion threshold reference: commanded distance over a full episode.
    double commanded_distance() const { return cmd_.v_x * cfg_.episode_seconds; }

    void enable_trajectory(const std::string& path);

private:
    void assemble_proprio();
    Vec teacher_terrain();
    Vec student_terrain();

    EnvConfig cfg_;
    Rng rng_;
    const terrain::Heightfield* hf_ = nullptr;
    terrain::TerrainKind kind_ = terrain::TerrainKind::Flat;
    int row_ = 0, col_ = 0;

    sim::WalkerState st_;
    sim::WalkerParams params_;
    rewards::Command cmd_;
    sim::Joints last_action_ = sim::Joints::Zero();
    std::array<sim::Vec2, 2> prev_foot_force_ = {sim::Vec2::Zero(), sim::Vec2::Zero()};

    obs::LatencyModel scan_latency_;
    std::deque<Vec> noisy_teacher_delay_;  // fixed 40 ms clean-elevation delay
    obs::DepthPipeline depth_;
    obs::ElevationCorruptor corruptor_;
    std::optional<Vec> elev_current_;

    double spawn_x_ = 0.0;
    double episode_return_ = 0.0;
    int episode_steps_ = 0;

    bool proprio_ready_ = false;
    Vec proprio_cached_;

    std::unique_ptr<std::ofstream> traj_;
};

}  // namespace visloco

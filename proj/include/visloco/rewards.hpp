#pragma once

#include "visloco/common.hpp"
#include "visloco/sim.hpp"

#include <array>
#include <string>

namespace visloco::rewards {

enum class CommandMode { Terrain, Curve, TurnInPlace, Stop };

struct Command {
    double v_x = 0.35;  // m/s, in [0, 0.75]
    CommandMode mode = CommandMode::Terrain;
};

// On terrain the command is the fixed 0.35 m/s walk; on flat ground one of
// the three sampling modes is chosen uniformly at random.
Command sample_command(bool on_terrain, Rng& rng);

struct RewardScales {
    double work = -1e-4;
    double tracking = 7.0;
    double foot_jerk = -1e-4;
    double feet_drag = -1e-4;
    double collision = -1.0;
    double survival = 1.0;
};

// The displayed penalty symbol is tau . q; the prose penalizes energy. Both
// forms are implemented; the active choice is recorded in every results file.
enum class WorkMode { Power, TorqueAngle };

struct RewardConfig {
    RewardScales scales;
    WorkMode work_mode = WorkMode::Power;
};

struct RewardBreakdown {
    double work = 0.0;       // raw |tau . qdot| (or |tau . q|)
    double tracking = 0.0;   // raw v_cmd - |v_cmd - v_x|
    double foot_jerk = 0.0;  // raw sum_i ||f_i(t) - f_i(t-1)||
    double feet_drag = 0.0;  // raw sum_i 1[loaded] * |v_x^i|
    double collision = 0.0;  // raw contact count
    double survival = 1.0;
    double total = 0.0;      // sum of scale_i * term_i

    std::array<double, 6> scaled(const RewardScales& s) const;
    static const std::array<const char*, 6>& term_names();
};

// One control step's reward. `prev_foot_force` is the previous step's mean
// foot force pair (for the jerk term).
RewardBreakdown reward_step(const sim::StepSnapshot& snap,
                            const std::array<sim::Vec2, 2>& prev_foot_force,
                            const Command& command, const RewardConfig& cfg);

}  // namespace visloco::rewards

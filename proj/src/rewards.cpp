#include "visloco/rewards.hpp"

namespace visloco::rewards {

Command sample_command(bool on_terrain, Rng& rng) {
    Command cmd;
    if (on_terrain) {
        cmd.v_x = 0.35;
        cmd.mode = CommandMode::Terrain;
        return cmd;
    }
    switch (rng.uniform_int(0, 2)) {
        case 0:
            cmd.mode = CommandMode::Curve;
            cmd.v_x = rng.uniform(0.2, 0.75);
            break;
        case 1:
            cmd.mode = CommandMode::TurnInPlace;
            cmd.v_x = 0.0;
            break;
        default:
            cmd.mode = CommandMode::Stop;
            cmd.v_x = 0.0;
            break;
    }
    return cmd;
}

std::array<double, 6> RewardBreakdown::scaled(const RewardScales& s) const {
    return {s.work * work,     s.tracking * tracking,   s.foot_jerk * foot_jerk,
            s.feet_drag * feet_drag, s.collision * collision, s.survival * survival};
}

const std::array<const char*, 6>& RewardBreakdown::term_names() {
    static const std::array<const char*, 6> names = {"work",      "tracking", "foot_jerk",
                                                     "feet_drag", "collision", "survival"};
    return names;
}

RewardBreakdown reward_step(const sim::StepSnapshot& snap,
                            const std::array<sim::Vec2, 2>& prev_foot_force,
                            const Command& command, const RewardConfig& cfg) {
    RewardBreakdown r;
    r.work = cfg.work_mode == WorkMode::Power ? snap.mean_abs_power : snap.abs_torque_angle;
    r.tracking = command.v_x - std::abs(command.v_x - snap.v_x);
    r.foot_jerk = (snap.foot_force[0] - prev_foot_force[0]).norm() +
                  (snap.foot_force[1] - prev_foot_force[1]).norm();
    r.feet_drag = (snap.foot_loaded[0] ? snap.foot_drag_speed[0] : 0.0) +
                  (snap.foot_loaded[1] ? snap.foot_drag_speed[1] : 0.0);
    r.collision = static_cast<double>(snap.leg_collision_count);
    r.survival = 1.0;
    const auto scaled = r.scaled(cfg.scales);
    r.total = 0.0;
    for (double v : scaled) r.total += v;
    return r;
}

}  // namespace visloco::rewards

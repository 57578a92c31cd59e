#pragma once

// Hand-scripted open-loop shuffle gait used as a test oracle. Glide phase:
// both legs planted and splayed, hips sweep forward-to-back so the body
// glides forward over the anchored feet. Recovery phase: a quick partial
// crouch unloads the feet while the hips sweep back, so the return drag is
// small and the cycle ratchets forward. Tuned for benign conditions: flat
// ground, default walker parameters, no pushes.

#include "visloco/env.hpp"
#include "visloco/sim.hpp"

namespace visloco::testing {

struct ScriptedGait {
    double splay = 0.25;        // constant leg splay keeping support wide, rad
    double swing = 0.20;        // hip sweep amplitude, rad
    double ext_long = 0.27;     // planted extension, m
    double ext_short = 0.23;    // recovery crouch extension, m
    double glide_time = 0.60;   // s
    double recover_time = 0.12; // s

    double period() const { return glide_time + recover_time; }
    // start mid-glide: symmetric splayed stance
    double start_phase() const { return 0.5 * glide_time; }

    sim::Joints target(double t) const {
        const double u = std::fmod(t, period());
        sim::Joints q;
        if (u < glide_time) {
            const double s = u / glide_time;                   // 0 -> 1
            const double delta = swing * (1.0 - 2.0 * s);      // +d -> -d
            q << splay + delta, ext_long, -splay + delta, ext_long;
        } else {
            const double s = (u - glide_time) / recover_time;  // 0 -> 1
            const double delta = swing * (2.0 * s - 1.0);      // -d -> +d
            q << splay + delta, ext_short, -splay + delta, ext_short;
        }
        return q;
    }

    // Places the walker in the stance matching start_phase() and settles it.
    void settle(sim::WalkerState& s, const terrain::Heightfield& hf, double x,
                const sim::WalkerParams& params, const sim::SimConfig& cfg) const {
        sim::place_on_terrain(s, hf, x, cfg);
        const sim::Joints q0 = target(start_phase());
        s.q = q0;
        s.z = terrain::height_at(hf, x) + ext_long * std::cos(splay) + 0.005;
        for (int k = 0; k < 50; ++k) (void)sim::step_control(s, q0, hf, params, cfg);
    }

};

// Adapter for the evaluation harness: the 1-dim hidden state carries the
// control-step counter; observations are ignored (open loop).
inline std::function<Vec(const policy::PolicyObs&, Vec&)> gait_act_fn(const ScriptedGait& gait,
                                                                      const sim::SimConfig& cfg) {
    return [gait, cfg](const policy::PolicyObs&, Vec& h) {
        const double t = h[0] * cfg.dt_control() + gait.start_phase();
        h[0] += 1.0;
        const sim::Joints q = gait.target(t);
        Vec action(4);
        for (int j = 0; j < 4; ++j) {
            action[j] = (q[j] - cfg.q_default[j]) / cfg.action_scale[j];
        }
        return action;
    };
}

}  // namespace visloco::testing

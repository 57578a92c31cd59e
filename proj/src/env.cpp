#include "visloco/env.hpp"

#include <cmath>
#include <iomanip>

namespace visloco {

Baseline baseline_from_name(const std::string& name) {
    if (name == "none") return Baseline::None;
    if (name == "blind") return Baseline::Blind;
    if (name == "noisy") return Baseline::Noisy;
    throw std::invalid_argument("unknown baseline: " + name);
}

const char* baseline_name(Baseline b) {
    switch (b) {
        case Baseline::None: return "none";
        case Baseline::Blind: return "blind";
        case Baseline::Noisy: return "noisy";
    }
    return "none";
}

Vec privileged_vector(const sim::WalkerParams& p, const sim::RandomizationRanges& r) {
    auto norm = [](double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; };
    Vec e(4);
    e[0] = norm(p.com_offset, r.com_lo, r.com_hi);
    e[1] = norm(p.friction, r.friction_lo, r.friction_hi);
    e[2] = norm(p.motor_strength, r.strength_lo, r.strength_hi);
    e[3] = norm(p.added_mass, r.added_mass_lo, r.added_mass_hi);
    return e;
}

Env::Env(const EnvConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      rng_(seed),
      scan_latency_(cfg.scan_latency),
      depth_(cfg.camera, cfg.depth_pp, cfg.depth_latency),
      corruptor_(cfg.elev_noise) {
    if (cfg_.noise.joint_pos_b.size() == 0) cfg_.finalize();
}

void Env::set_cell(const terrain::Heightfield* hf, terrain::TerrainKind kind, int row, int col) {
    hf_ = hf;
    kind_ = kind;
    row_ = row;
    col_ = col;
}

void Env::reset() {
    if (!hf_) throw std::runtime_error("Env::reset: no terrain cell attached");
    params_ = cfg_.randomize_dynamics ? sim::randomize_params(rng_, cfg_.rand)
                                      : sim::WalkerParams{};
    spawn_x_ = 0.5;  // middle of the spawn pad
    sim::place_on_terrain(st_, *hf_, spawn_x_, cfg_.sim);
    const double j = cfg_.init_jitter;
    st_.q[0] += j * rng_.uniform(-0.1, 0.1);
    st_.q[1] += j * rng_.uniform(-0.02, 0.02);
    st_.q[2] += j * rng_.uniform(-0.1, 0.1);
    st_.q[3] += j * rng_.uniform(-0.02, 0.02);
    st_.theta += j * rng_.uniform(-0.05, 0.05);
    st_.vx += j * rng_.uniform(-0.05, 0.2);
    st_.z += 0.01;

    cmd_ = rewards::sample_command(kind_ != terrain::TerrainKind::Flat, rng_);
    if (cfg_.command_override) {
        cmd_.v_x = *cfg_.command_override;
        cmd_.mode = rewards::CommandMode::Terrain;
    }
    last_action_.setZero();
    prev_foot_force_ = {sim::Vec2::Zero(), sim::Vec2::Zero()};
    scan_latency_.reset(st_.t, rng_);
    noisy_teacher_delay_.clear();
    if (cfg_.enable_depth) depth_.reset(st_.t, rng_);
    if (cfg_.enable_elevation) corruptor_.reset(rng_);
    elev_current_.reset();
    episode_return_ = 0.0;
    episode_steps_ = 0;
    proprio_ready_ = false;

    // pipelines see the spawn state
    if (cfg_.baseline == Baseline::Noisy) {
        Vec clean = obs::scandots(st_, *hf_, cfg_.layout);
        noisy_teacher_delay_.assign(1, clean);
    } else {
        scan_latency_.advance(st_.t, rng_, [this](double) {
            obs::ScanLayout layout = cfg_.layout;
            if (cfg_.obs_noise && cfg_.noise.enabled && cfg_.noise.scandot_loc_sigma > 0.0) {
                for (double& off : layout.offsets) {
                    off += rng_.normal(0.0, cfg_.noise.scandot_loc_sigma);
                }
            }
            return obs::scandots(st_, *hf_, layout);
        });
    }
    if (cfg_.enable_depth) depth_.advance(st_, *hf_, cfg_.sim, rng_);
    if (cfg_.enable_elevation) {
        elev_current_ = corruptor_.step(st_, *hf_, cfg_.layout, rng_);
    }
}

void Env::assemble_proprio() {
    if (proprio_ready_) return;
    const obs::Proprioception p = obs::proprio(st_, last_action_);
    Rng* noise_rng = (cfg_.obs_noise && cfg_.noise.enabled) ? &rng_ : nullptr;
    Vec x(obs::Proprioception::kDim);
    for (int jidx = 0; jidx < 4; ++jidx) {
        obs::NoiseTableEntry e = cfg_.noise.joint_pos;
        e.b = cfg_.noise.joint_pos_b.size() == 4 ? cfg_.noise.joint_pos_b[jidx] : e.b;
        x[jidx] = obs::apply_entry(e, p.q[jidx], noise_rng);
    }
    for (int jidx = 0; jidx < 4; ++jidx) {
        x[4 + jidx] = obs::apply_entry(cfg_.noise.joint_vel, p.qd[jidx], noise_rng);
    }
    x[8] = obs::apply_entry(cfg_.noise.ang_vel, p.omega, noise_rng);
    x[9] = obs::apply_entry(cfg_.noise.orientation, p.pitch, noise_rng);
    x.segment<4>(10) = p.last_action;
    proprio_cached_ = std::move(x);
    proprio_ready_ = true;
}

Vec Env::teacher_terrain() {
    if (cfg_.baseline == Baseline::Blind) return Vec::Zero(cfg_.layout.size());
    if (cfg_.baseline == Baseline::Noisy) {
        // clean elevation, fixed 40 ms behind (two control steps)
        return noisy_teacher_delay_.front() * cfg_.noise.scandot.a;
    }
    Vec m = scan_latency_.has_scan() ? scan_latency_.current()
                                     : obs::scandots(st_, *hf_, cfg_.layout);
    Rng* noise_rng = (cfg_.obs_noise && cfg_.noise.enabled) ? &rng_ : nullptr;
    return obs::apply_entry(cfg_.noise.scandot, m, noise_rng);
}

Vec Env::student_terrain() {
    if (cfg_.baseline == Baseline::Blind) return Vec::Zero(cfg_.depth_pp.output);
    if (cfg_.enable_elevation && elev_current_) {
        return *elev_current_ * cfg_.noise.scandot.a;
    }
    if (cfg_.enable_depth && depth_.has_scan()) {
        Vec d = depth_.processed();
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            d[i] = (d[i] - cfg_.depth_norm_center) / cfg_.depth_norm_scale;
        }
        return d;
    }
    return Vec::Constant(cfg_.depth_pp.output,
                         (cfg_.camera.max_range - cfg_.depth_norm_center) / cfg_.depth_norm_scale);
}

policy::PolicyObs Env::observe_teacher() {
    assemble_proprio();
    policy::PolicyObs o;
    o.x = proprio_cached_;
    o.terrain = teacher_terrain();
    o.priv = privileged_vector(params_, cfg_.rand);
    o.cmd = cmd_.v_x;
    return o;
}

policy::PolicyObs Env::observe_student() {
    assemble_proprio();
    policy::PolicyObs o;
    o.x = proprio_cached_;
    o.terrain = student_terrain();
    o.priv = Vec::Zero(4);  // not available onboard
    o.cmd = cmd_.v_x;
    return o;
}

StepResult Env::step(const Vec& action) {
    if (action.size() != 4) throw std::invalid_argument("Env::step: action must have 4 dims");
    sim::Joints q_des;
    for (int jidx = 0; jidx < 4; ++jidx) {
        q_des[jidx] = cfg_.sim.q_default[jidx] + cfg_.sim.action_scale[jidx] * action[jidx];
    }
    q_des[0] = std::clamp(q_des[0], -cfg_.sim.hip_limit, cfg_.sim.hip_limit);
    q_des[2] = std::clamp(q_des[2], -cfg_.sim.hip_limit, cfg_.sim.hip_limit);
    q_des[1] = std::clamp(q_des[1], cfg_.sim.ext_lo, cfg_.sim.ext_hi);
    q_des[3] = std::clamp(q_des[3], cfg_.sim.ext_lo, cfg_.sim.ext_hi);

    const sim::StepSnapshot snap = sim::step_control(st_, q_des, *hf_, params_, cfg_.sim);
    if (cfg_.pushes) (void)sim::apply_push(st_, cfg_.push, rng_);

    // advance observation pipelines to the post-step state
    if (cfg_.baseline == Baseline::Noisy) {
        noisy_teacher_delay_.push_back(obs::scandots(st_, *hf_, cfg_.layout));
        while (static_cast<int>(noisy_teacher_delay_.size()) > 3) noisy_teacher_delay_.pop_front();
    } else {
        scan_latency_.advance(st_.t, rng_, [this](double) {
            obs::ScanLayout layout = cfg_.layout;
            if (cfg_.obs_noise && cfg_.noise.enabled && cfg_.noise.scandot_loc_sigma > 0.0) {
                for (double& off : layout.offsets) {
                    off += rng_.normal(0.0, cfg_.noise.scandot_loc_sigma);
                }
            }
            return obs::scandots(st_, *hf_, layout);
        });
    }
    if (cfg_.enable_depth) depth_.advance(st_, *hf_, cfg_.sim, rng_);
    if (cfg_.enable_elevation) elev_current_ = corruptor_.step(st_, *hf_, cfg_.layout, rng_);

    StepResult res;
    res.reward = rewards::reward_step(snap, prev_foot_force_, cmd_, cfg_.reward);
    prev_foot_force_ = snap.foot_force;
    last_action_ = action;
    proprio_ready_ = false;
    ++episode_steps_;
    episode_return_ += res.reward.total;

    res.kind = sim::check_termination(st_, *hf_, cfg_.sim);
    res.fault = snap.fault;
    if (res.kind != sim::Termination::Alive || res.fault) {
        res.done = true;
        res.terminal = true;
    } else if (episode_steps_ >= max_episode_steps()) {
        res.done = true;
        res.terminal = false;
    }

    if (traj_) {
        auto scaled = res.reward.scaled(cfg_.reward.scales);
        *traj_ << std::setprecision(10) << st_.t << "," << st_.x << "," << st_.z << ","
               << st_.theta;
        for (int jidx = 0; jidx < 4; ++jidx) *traj_ << "," << st_.q[jidx];
        *traj_ << "," << snap.foot_normal[0] << "," << snap.foot_normal[1];
        for (double v : scaled) *traj_ << "," << v;
        *traj_ << "," << res.reward.total << "\n";
    }
    return res;
}

void Env::enable_trajectory(const std::string& path) {
    traj_ = std::make_unique<std::ofstream>(path);
    if (!*traj_) throw std::runtime_error("Env: cannot open trajectory file " + path);
    *traj_ << "t,x,z,theta,q0,q1,q2,q3,f0,f1,r_work,r_tracking,r_jerk,r_drag,r_collision,"
              "r_survival,r_total\n";
}

}  // namespace visloco

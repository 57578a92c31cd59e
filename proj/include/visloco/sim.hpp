#pragma once

#include "visloco/common.hpp"
#include "visloco/terrain.hpp"

#include <array>
#include <string>

namespace visloco::sim {

// Joint order: [hip front, extension front, hip rear, extension rear].
// Hips in radians, extensions in meters.
using Joints = Eigen::Vector4d;
using Vec2 = Eigen::Vector2d;

struct SimConfig {
    double dt_sub = 1.0 / 400.0;
    double control_hz = 50.0;
    double gravity = 9.81;
    double body_mass = 12.0;
    double body_inertia = 0.15;
    double foot_mass = 0.3;
    double hip_x = 0.08;          // hip anchor half-spacing along the body axis
    double body_half_len = 0.20;  // collision capsule half length
    double body_radius = 0.09;
    double head_x = 0.24;
    double head_z = 0.05;
    double head_radius = 0.05;
    double cam_x = 0.24;          // depth camera mount, body frame
    double cam_z = 0.10;
    double contact_k = 5000.0;    // N/m
    double contact_c = 50.0;      // N s/m
    double contact_kt = 5000.0;
    double contact_ct = 50.0;
    double foot_radius = 0.02;    // ball foot: can rest on edges within this span
    double hip_limit = 1.2;       // rad
    double ext_lo = 0.12;         // m
    double ext_hi = 0.35;
    double limit_k_hip = 100.0;
    double limit_c_hip = 2.0;
    double limit_k_ext = 30000.0;
    double limit_c_ext = 200.0;
    double joint_damping_hip = 0.1;
    double joint_damping_ext = 2.0;
    double armature_hip = 0.02;   // reflected rotor inertia
    double armature_ext = 0.5;
    double tau_max_hip = 33.5;    // N m
    double tau_max_ext = 170.0;   // N
    double ext_gain_ratio = 60.0; // prismatic gains = revolute gains x ratio
    std::array<double, 4> q_default = {0.0, 0.25, 0.0, 0.25};
    std::array<double, 4> action_scale = {0.5, 0.08, 0.5, 0.08};

    int substeps() const { return static_cast<int>(std::lround(1.0 / (control_hz * dt_sub))); }
    double dt_control() const { return 1.0 / control_hz; }
};

// Randomized physical parameters (domain randomization).
struct WalkerParams {
    double added_mass = 0.0;      // kg
    double com_offset = 0.0;      // m, longitudinal
    double friction = 1.0;        // ground mu
    double motor_strength = 1.0;  // scale on PD torque
    double kp = 40.0;
    double kd = 0.5;
};

struct RandomizationRanges {
    double added_mass_lo = -2.0, added_mass_hi = 6.0;
    double com_lo = -0.15, com_hi = 0.15;
    double friction_lo = 0.3, friction_hi = 1.25;
    double strength_lo = 0.9, strength_hi = 1.1;
    double kp_lo = 35.0, kp_hi = 45.0;
    double kd_lo = 0.4, kd_hi = 0.6;
};

WalkerParams randomize_params(Rng& rng, const RandomizationRanges& ranges = {});

struct PushSchedule {
    double interval = 15.0;  // seconds
    double speed = 0.3;      // m/s impulse magnitude
};

// Contact points: 0,1 = front/rear foot; 2,3 = front/rear mid-leg probe
// (thigh/calf equivalent, used by the collision penalty).
constexpr int kNumContacts = 4;

struct WalkerState {
    double x = 0.0, z = 0.0, theta = 0.0;
    double vx = 0.0, vz = 0.0, omega = 0.0;
    Joints q = Joints::Zero();
    Joints qd = Joints::Zero();
    double t = 0.0;
    std::array<Vec2, 2> foot_force = {Vec2::Zero(), Vec2::Zero()};  // world frame
    std::array<bool, kNumContacts> in_contact = {false, false, false, false};
    std::array<double, kNumContacts> anchor = {0.0, 0.0, 0.0, 0.0};  // friction anchors
    double next_push_t = 0.0;
    bool fault = false;  // non-finite state encountered
};

enum class Termination { Alive, Fell, Collided };

// Per-control-step bookkeeping consumed by the reward module.
struct StepSnapshot {
    double mean_abs_power = 0.0;       // mean over substeps of |tau . qdot|
    double abs_torque_angle = 0.0;     // |tau . q| at the end of the step
    std::array<Vec2, 2> foot_force = {Vec2::Zero(), Vec2::Zero()};  // substep mean
    std::array<double, 2> foot_normal = {0.0, 0.0};                 // vertical component
    std::array<double, 2> foot_drag_speed = {0.0, 0.0};  // |vx| while loaded >= 1 N
    std::array<bool, 2> foot_loaded = {false, false};
    int leg_collision_count = 0;       // mid-leg probes with force >= 0.1 N
    double v_x = 0.0;                  // body forward velocity after the step
    bool fault = false;
};

Joints pd_torque(const Joints& q_des, const Joints& q, const Joints& qd,
                 const WalkerParams& params, const SimConfig& cfg);

// One semi-implicit Euler substep under fixed joint torques.
void step_physics(WalkerState& state, const Joints& tau, const terrain::Heightfield& hf,
                  const WalkerParams& params, const SimConfig& cfg, double dt);

// One 50 Hz control step: 8 physics substeps with the PD torques recomputed
// each substep against a fixed target.
StepSnapshot step_control(WalkerState& state, const Joints& q_des, const terrain::Heightfield& hf,
                          const WalkerParams& params, const SimConfig& cfg);

Termination check_termination(const WalkerState& state, const terrain::Heightfield& hf,
                              const SimConfig& cfg);

// Applies a velocity impulse if the scheduled instant has passed. Returns
// true when a push fired.
bool apply_push(WalkerState& state, const PushSchedule& schedule, Rng& rng);

// Kinematics helpers.
Vec2 foot_position(const WalkerState& state, int leg, const SimConfig& cfg);
Vec2 foot_velocity(const WalkerState& state, int leg, const SimConfig& cfg);
Vec2 camera_position(const WalkerState& state, const SimConfig& cfg);

// Places the walker standing at rest with feet on the surface.
void place_on_terrain(WalkerState& state, const terrain::Heightfield& hf, double x,
                      const SimConfig& cfg);

}  // namespace visloco::sim

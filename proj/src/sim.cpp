#include "visloco/sim.hpp"

#include <cmath>

namespace visloco::sim {

namespace {

using terrain::Heightfield;
using terrain::height_at;
using terrain::slope_at;

constexpr int kDof = 7;  // x, z, theta, q0..q3
using VecDof = Eigen::Matrix<double, kDof, 1>;
using MatDof = Eigen::Matrix<double, kDof, kDof>;
using Jac = Eigen::Matrix<double, 2, kDof>;

struct PointKin {
    Vec2 pos;
    Vec2 vel;
    Jac jac;
    Vec2 bias;  // Jdot * v
};

// Kinematics of a point on leg `leg` at fraction `frac` of the extension
// (frac=1 is the foot, frac=0.5 the mid-leg probe).
PointKin leg_point(const WalkerState& s, int leg, double frac, const SimConfig& cfg) {
    const double a = leg == 0 ? cfg.hip_x : -cfg.hip_x;
    const int qh = leg == 0 ? 0 : 2;
    const int qe = qh + 1;
    const double phi = s.theta + s.q[qh];
    const double e = s.q[qe] * frac;
    const double ed = s.qd[qe] * frac;
    const double phid = s.omega + s.qd[qh];
    const double sth = std::sin(s.theta), cth = std::cos(s.theta);
    const double sph = std::sin(phi), cph = std::cos(phi);

    PointKin k;
    k.pos = Vec2(s.x + a * cth + e * sph, s.z + a * sth - e * cph);
    k.jac.setZero();
    k.jac(0, 0) = 1.0;
    k.jac(1, 1) = 1.0;
    k.jac(0, 2) = -a * sth + e * cph;
    k.jac(1, 2) = a * cth + e * sph;
    k.jac(0, 3 + qh) = e * cph;
    k.jac(1, 3 + qh) = e * sph;
    k.jac(0, 3 + qe) = frac * sph;
    k.jac(1, 3 + qe) = -frac * cph;

    VecDof v;
    v << s.vx, s.vz, s.omega, s.qd[0], s.qd[1], s.qd[2], s.qd[3];
    k.vel = k.jac * v;

    k.bias.x() = -a * cth * s.omega * s.omega + 2.0 * ed * cph * phid - e * sph * phid * phid;
    k.bias.y() = -a * sth * s.omega * s.omega + 2.0 * ed * sph * phid + e * cph * phid * phid;
    return k;
}

PointKin body_com(const WalkerState& s, const WalkerParams& p, const SimConfig& cfg) {
    (void)cfg;
    const double c = p.com_offset;
    const double sth = std::sin(s.theta), cth = std::cos(s.theta);
    PointKin k;
    k.pos = Vec2(s.x + c * cth, s.z + c * sth);
    k.jac.setZero();
    k.jac(0, 0) = 1.0;
    k.jac(1, 1) = 1.0;
    k.jac(0, 2) = -c * sth;
    k.jac(1, 2) = c * cth;
    k.vel = Vec2(s.vx - c * sth * s.omega, s.vz + c * cth * s.omega);
    k.bias = Vec2(-c * cth * s.omega * s.omega, -c * sth * s.omega * s.omega);
    return k;
}

// Spring-damper normal contact with an anchor-dragged Coulomb friction cap.
// Returns the world-frame force on the point; updates anchor state. A ball
// foot of radius r rests on whichever support under [-r, +r] reaches highest.
Vec2 contact_force(const PointKin& k, const Heightfield& hf, double mu, const SimConfig& cfg,
                   double radius, bool& in_contact, double& anchor) {
    double h = height_at(hf, k.pos.x());
    double support_x = k.pos.x();
    if (radius > 0.0) {
        for (double off : {-radius, radius}) {
            const double hs = height_at(hf, k.pos.x() + off);
            if (hs > h) {
                h = hs;
                support_x = k.pos.x() + off;
            }
        }
    }
    const double dz = h - k.pos.y();
    if (dz <= 0.0) {
        in_contact = false;
        return Vec2::Zero();
    }
    // steeper than 45 degrees acts as a wall face, not a support normal
    const double slope = std::clamp(slope_at(hf, support_x), -1.0, 1.0);
    const double inv_len = 1.0 / std::sqrt(1.0 + slope * slope);
    const Vec2 n(-slope * inv_len, inv_len);
    const Vec2 t(inv_len, slope * inv_len);

    const double pen_n = dz * n.y();
    const double vn = k.vel.dot(n);
    double fn = cfg.contact_k * pen_n - cfg.contact_c * vn;
    if (fn < 0.0) fn = 0.0;

    const double xi = k.pos.dot(t);
    if (!in_contact) {
        anchor = xi;
        in_contact = true;
    }
    const double vt = k.vel.dot(t);
    double ft = -cfg.contact_kt * (xi - anchor) - cfg.contact_ct * vt;
    const double cap = mu * fn;
    if (ft > cap) {
        ft = cap;
        anchor = xi + (ft + cfg.contact_ct * vt) / cfg.contact_kt;
    } else if (ft < -cap) {
        ft = -cap;
        anchor = xi + (ft + cfg.contact_ct * vt) / cfg.contact_kt;
    }
    return fn * n + ft * t;
}

double joint_limit_force(double q, double qd, double lo, double hi, double k, double c) {
    if (q < lo) return k * (lo - q) - c * qd;
    if (q > hi) return -k * (q - hi) - c * qd;
    return 0.0;
}

bool capsule_hits_terrain(const Vec2& p0, const Vec2& p1, double radius, const Heightfield& hf) {
    constexpr int kSamples = 9;
    for (int i = 0; i < kSamples; ++i) {
        const double t = static_cast<double>(i) / (kSamples - 1);
        const Vec2 p = p0 + t * (p1 - p0);
        if (p.y() - radius < height_at(hf, p.x())) return true;
    }
    return false;
}

}  // namespace

WalkerParams randomize_params(Rng& rng, const RandomizationRanges& r) {
    WalkerParams p;
    p.added_mass = rng.uniform(r.added_mass_lo, r.added_mass_hi);
    p.com_offset = rng.uniform(r.com_lo, r.com_hi);
    p.friction = rng.uniform(r.friction_lo, r.friction_hi);
    p.motor_strength = rng.uniform(r.strength_lo, r.strength_hi);
    p.kp = rng.uniform(r.kp_lo, r.kp_hi);
    p.kd = rng.uniform(r.kd_lo, r.kd_hi);
    return p;
}

Joints pd_torque(const Joints& q_des, const Joints& q, const Joints& qd,
                 const WalkerParams& params, const SimConfig& cfg) {
    Joints tau;
    for (int j = 0; j < 4; ++j) {
        const bool ext = (j % 2) == 1;
        const double gain = ext ? cfg.ext_gain_ratio : 1.0;
        const double raw = params.kp * gain * (q_des[j] - q[j]) - params.kd * gain * qd[j];
        const double lim = ext ? cfg.tau_max_ext : cfg.tau_max_hip;
        tau[j] = params.motor_strength * std::clamp(raw, -lim, lim);
    }
    return tau;
}

void step_physics(WalkerState& s, const Joints& tau, const Heightfield& hf,
                  const WalkerParams& params, const SimConfig& cfg, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("step_physics: dt must be > 0");
    if (s.fault) return;

    const double total_body_mass = cfg.body_mass + params.added_mass;

    const PointKin com = body_com(s, params, cfg);
    const PointKin foot_f = leg_point(s, 0, 1.0, cfg);
    const PointKin foot_r = leg_point(s, 1, 1.0, cfg);
    const PointKin knee_f = leg_point(s, 0, 0.5, cfg);
    const PointKin knee_r = leg_point(s, 1, 0.5, cfg);

    MatDof M = MatDof::Zero();
    VecDof rhs = VecDof::Zero();

    auto add_point_mass = [&M, &rhs, &cfg](const PointKin& k, double m) {
        M.noalias() += m * k.jac.transpose() * k.jac;
        rhs.noalias() += k.jac.transpose() * (Vec2(0.0, -m * cfg.gravity) - m * k.bias);
    };
    add_point_mass(com, total_body_mass);
    add_point_mass(foot_f, cfg.foot_mass);
    add_point_mass(foot_r, cfg.foot_mass);

    M(2, 2) += cfg.body_inertia;
    M(3, 3) += cfg.armature_hip;
    M(4, 4) += cfg.armature_ext;
    M(5, 5) += cfg.armature_hip;
    M(6, 6) += cfg.armature_ext;

    // actuation, joint damping and mechanical stops
    for (int j = 0; j < 4; ++j) {
        const bool ext = (j % 2) == 1;
        double f = tau[j] - (ext ? cfg.joint_damping_ext : cfg.joint_damping_hip) * s.qd[j];
        if (ext) {
            f += joint_limit_force(s.q[j], s.qd[j], cfg.ext_lo, cfg.ext_hi, cfg.limit_k_ext,
                                   cfg.limit_c_ext);
        } else {
            f += joint_limit_force(s.q[j], s.qd[j], -cfg.hip_limit, cfg.hip_limit, cfg.limit_k_hip,
                                   cfg.limit_c_hip);
        }
        rhs[3 + j] += f;
    }

    // contacts: feet carry the ball-foot radius, mid-leg probes do not
    const PointKin* points[kNumContacts] = {&foot_f, &foot_r, &knee_f, &knee_r};
    for (int i = 0; i < kNumContacts; ++i) {
        const double radius = i < 2 ? cfg.foot_radius : 0.0;
        const Vec2 f = contact_force(*points[i], hf, params.friction, cfg, radius,
                                     s.in_contact[i], s.anchor[i]);
        rhs.noalias() += points[i]->jac.transpose() * f;
        if (i < 2) s.foot_force[i] = f;
    }

    const VecDof accel = M.ldlt().solve(rhs);

    VecDof v;
    v << s.vx, s.vz, s.omega, s.qd[0], s.qd[1], s.qd[2], s.qd[3];
    v += accel * dt;
    s.vx = v[0];
    s.vz = v[1];
    s.omega = v[2];
    for (int j = 0; j < 4; ++j) s.qd[j] = v[3 + j];

    s.x += s.vx * dt;
    s.z += s.vz * dt;
    s.theta += s.omega * dt;
    if (s.theta > M_PI) s.theta -= 2.0 * M_PI;
    if (s.theta < -M_PI) s.theta += 2.0 * M_PI;
    for (int j = 0; j < 4; ++j) s.q[j] += s.qd[j] * dt;
    s.t += dt;

    if (!std::isfinite(s.x) || !std::isfinite(s.z) || !std::isfinite(s.theta) ||
        !std::isfinite(s.vx) || !std::isfinite(s.vz) || !std::isfinite(s.omega) ||
        !s.q.allFinite() || !s.qd.allFinite()) {
        s.fault = true;
    }
}

StepSnapshot step_control(WalkerState& s, const Joints& q_des, const Heightfield& hf,
                          const WalkerParams& params, const SimConfig& cfg) {
    StepSnapshot snap;
    const int n = cfg.substeps();
    std::array<Vec2, 2> force_sum = {Vec2::Zero(), Vec2::Zero()};
    std::array<double, 2> drag_sum = {0.0, 0.0};
    std::array<int, 2> loaded_count = {0, 0};
    std::array<bool, 2> leg_hit = {false, false};
    double power_sum = 0.0;
    Joints tau = Joints::Zero();

    for (int k = 0; k < n; ++k) {
        tau = pd_torque(q_des, s.q, s.qd, params, cfg);
        step_physics(s, tau, hf, params, cfg, cfg.dt_sub);
        if (s.fault) {
            snap.fault = true;
            break;
        }
        power_sum += std::abs(tau.dot(s.qd));
        for (int i = 0; i < 2; ++i) {
            force_sum[i] += s.foot_force[i];
            if (s.foot_force[i].y() >= 1.0) {
                ++loaded_count[i];
                drag_sum[i] += std::abs(foot_velocity(s, i, cfg).x());
            }
            // mid-leg probes are contacts 2 and 3
            if (s.in_contact[2 + i]) leg_hit[i] = true;
        }
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    snap.mean_abs_power = power_sum * inv_n;
    snap.abs_torque_angle = std::abs(tau.dot(s.q));
    for (int i = 0; i < 2; ++i) {
        snap.foot_force[i] = force_sum[i] * inv_n;
        snap.foot_normal[i] = snap.foot_force[i].y();
        snap.foot_loaded[i] = loaded_count[i] > 0;
        snap.foot_drag_speed[i] =
            loaded_count[i] > 0 ? drag_sum[i] / static_cast<double>(loaded_count[i]) : 0.0;
        if (leg_hit[i]) ++snap.leg_collision_count;
    }
    snap.v_x = s.vx;
    snap.fault = snap.fault || s.fault;
    return snap;
}

Termination check_termination(const WalkerState& s, const Heightfield& hf, const SimConfig& cfg) {
    if (std::abs(s.theta) > M_PI / 2.0) return Termination::Fell;
    const double sth = std::sin(s.theta), cth = std::cos(s.theta);
    const Vec2 center(s.x, s.z);
    const Vec2 axis(cth, sth);
    const Vec2 body0 = center - cfg.body_half_len * axis;
    const Vec2 body1 = center + cfg.body_half_len * axis;
    if (capsule_hits_terrain(body0, body1, cfg.body_radius, hf)) return Termination::Collided;
    const Vec2 head = center + Vec2(cfg.head_x * cth - cfg.head_z * sth,
                                    cfg.head_x * sth + cfg.head_z * cth);
    if (capsule_hits_terrain(head, head, cfg.head_radius, hf)) return Termination::Collided;
    return Termination::Alive;
}

bool apply_push(WalkerState& s, const PushSchedule& schedule, Rng& rng) {
    if (schedule.interval <= 0.0) throw std::invalid_argument("apply_push: interval must be > 0");
    if (s.next_push_t <= 0.0) s.next_push_t = schedule.interval;
    if (s.t + 1e-9 < s.next_push_t) return false;
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    s.vx += schedule.speed * std::cos(angle);
    s.vz += schedule.speed * std::sin(angle);
    s.next_push_t += schedule.interval;
    return true;
}

Vec2 foot_position(const WalkerState& s, int leg, const SimConfig& cfg) {
    return leg_point(s, leg, 1.0, cfg).pos;
}

Vec2 foot_velocity(const WalkerState& s, int leg, const SimConfig& cfg) {
    return leg_point(s, leg, 1.0, cfg).vel;
}

Vec2 camera_position(const WalkerState& s, const SimConfig& cfg) {
    const double sth = std::sin(s.theta), cth = std::cos(s.theta);
    return Vec2(s.x + cfg.cam_x * cth - cfg.cam_z * sth, s.z + cfg.cam_x * sth + cfg.cam_z * cth);
}

void place_on_terrain(WalkerState& s, const Heightfield& hf, double x, const SimConfig& cfg) {
    s = WalkerState{};
    s.x = x;
    for (int j = 0; j < 4; ++j) s.q[j] = cfg.q_default[j];
    const double ground = std::max(height_at(hf, x + cfg.hip_x), height_at(hf, x - cfg.hip_x));
    s.z = ground + cfg.q_default[1] + 0.01;
}

}  // namespace visloco::sim

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gait_oracle.hpp"

#include "visloco/sim.hpp"

using namespace visloco;
using namespace visloco::sim;
using terrain::Heightfield;
using terrain::TerrainKind;

namespace {

Heightfield flat_field() { return terrain::generate_terrain(TerrainKind::Flat, 0.0, 0, {}); }

Heightfield slope_field(double grade) {
    // plain ramp through the whole field, no pads
    terrain::TerrainConfig cfg;
    cfg.spawn_pad = 0.0;
    cfg.end_pad = 0.0;
    Heightfield hf = terrain::generate_terrain(TerrainKind::Flat, 0.0, 0, cfg);
    for (std::size_t i = 0; i < hf.samples.size(); ++i) {
        hf.samples[i] = grade * (static_cast<double>(i) * hf.dx);
    }
    return hf;
}

// Settles the walker under PD hold at the default pose.
WalkerState settled_state(const Heightfield& hf, const WalkerParams& params, const SimConfig& cfg,
                          double x, double seconds = 2.0) {
    WalkerState s;
    place_on_terrain(s, hf, x, cfg);
    Joints q_des;
    for (int j = 0; j < 4; ++j) q_des[j] = cfg.q_default[j];
    const int steps = static_cast<int>(seconds * cfg.control_hz);
    for (int k = 0; k < steps; ++k) (void)step_control(s, q_des, hf, params, cfg);
    return s;
}

}  // namespace

TEST_CASE("pd torque: zero error and zero velocity give zero torque") {
    SimConfig cfg;
    WalkerParams p;
    Joints q;
    q << 0.1, 0.2, -0.1, 0.3;
    Joints tau = pd_torque(q, q, Joints::Zero(), p, cfg);
    CHECK(tau.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("pd torque: unit error below the clamp gives Kp per unit error") {
    SimConfig cfg;
    cfg.ext_gain_ratio = 1.0;  // plain formula on every joint
    cfg.tau_max_hip = 1e6;
    cfg.tau_max_ext = 1e6;
    WalkerParams p;
    p.kp = 40.0;
    Joints q_des = Joints::Ones();
    Joints tau = pd_torque(q_des, Joints::Zero(), Joints::Zero(), p, cfg);
    for (int j = 0; j < 4; ++j) CHECK(tau[j] == doctest::Approx(40.0));
}

TEST_CASE("pd torque: motor strength scales the PD value") {
    SimConfig cfg;
    WalkerParams p;
    p.motor_strength = 1.0;
    Joints q_des;
    q_des << 0.2, 0.26, -0.2, 0.24;
    Joints qd;
    qd << 0.5, -0.1, 0.0, 0.3;
    Joints base = pd_torque(q_des, Joints::Zero(), qd, p, cfg);
    p.motor_strength = 0.9;
    Joints scaled = pd_torque(q_des, Joints::Zero(), qd, p, cfg);
    for (int j = 0; j < 4; ++j) CHECK(scaled[j] == doctest::Approx(0.9 * base[j]));
}

TEST_CASE("pd torque clamps at the torque limit") {
    SimConfig cfg;
    WalkerParams p;
    Joints q_des;
    q_des << 10.0, 0.25, -10.0, 0.25;
    Joints tau = pd_torque(q_des, Joints::Zero(), Joints::Zero(), p, cfg);
    CHECK(tau[0] == doctest::Approx(cfg.tau_max_hip));
    CHECK(tau[2] == doctest::Approx(-cfg.tau_max_hip));
}

TEST_CASE("ballistic: feet off the ground, vz drops by g*t") {
    SimConfig cfg;
    WalkerParams p;
    Heightfield hf = flat_field();
    WalkerState s;
    place_on_terrain(s, hf, 4.0, cfg);
    s.z += 2.0;  // airborne
    const double vz0 = s.vz;
    for (int k = 0; k < 40; ++k) step_physics(s, Joints::Zero(), hf, p, cfg, cfg.dt_sub);
    CHECK(s.vz - vz0 == doctest::Approx(-9.81 * 0.1).epsilon(0.01));
}

TEST_CASE("static equilibrium: settled contact forces carry the weight within 2%") {
    SimConfig cfg;
    WalkerParams p;
    Heightfield hf = flat_field();
    WalkerState s = settled_state(hf, p, cfg, 4.0, 3.0);
    const double weight = (cfg.body_mass + p.added_mass + 2.0 * cfg.foot_mass) * cfg.gravity;
    const double support = s.foot_force[0].y() + s.foot_force[1].y();
    CHECK(support == doctest::Approx(weight).epsilon(0.02));
    CHECK(std::abs(s.vx) < 0.01);
    CHECK(std::abs(s.vz) < 0.01);
}

TEST_CASE("friction: low mu slips on a 0.4-grade slope, high mu holds") {
    SimConfig cfg;
    cfg.hip_x = 0.3;     // wide stance so only friction decides the outcome
    cfg.contact_c = 200.0;  // damp the initial rocking transient quickly
    const double grade = 0.4;
    Heightfield hf = slope_field(grade);
    auto max_loaded_slip = [&](double mu) {
        WalkerParams p;
        p.friction = mu;
        WalkerState s;
        place_on_terrain(s, hf, 6.0, cfg);
        // align the body with the slope so both feet rest on the surface
        s.theta = std::atan(grade);
        const Vec2 foot = foot_position(s, 0, cfg);
        s.z += grade * foot.x() - foot.y() + 0.002;
        Joints q_des;
        for (int j = 0; j < 4; ++j) q_des[j] = cfg.q_default[j];
        for (int k = 0; k < 100; ++k) (void)step_control(s, q_des, hf, p, cfg);  // settle
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            (void)step_control(s, q_des, hf, p, cfg);
            for (int i = 0; i < 2; ++i) {
                if (s.foot_force[i].y() > 1.0) {
                    worst = std::max(worst, std::abs(foot_velocity(s, i, cfg).x()));
                }
            }
        }
        return worst;
    };
    CHECK(max_loaded_slip(0.3) > 0.01);
    CHECK(max_loaded_slip(1.25) < 0.01);
}

TEST_CASE("friction cone: tangential force never exceeds mu times normal") {
    SimConfig cfg;
    Heightfield hf = slope_field(0.25);
    WalkerParams p;
    p.friction = 0.6;
    WalkerState s;
    place_on_terrain(s, hf, 3.0, cfg);
    Rng rng(5);
    Joints q_des;
    for (int k = 0; k < 400; ++k) {
        for (int j = 0; j < 4; ++j) {
            q_des[j] = cfg.q_default[j] + (j % 2 == 0 ? rng.uniform(-0.4, 0.4)
                                                      : rng.uniform(-0.05, 0.05));
        }
        step_physics(s, pd_torque(q_des, s.q, s.qd, p, cfg), hf, p, cfg, cfg.dt_sub);
        for (int i = 0; i < 2; ++i) {
            const Vec2 f = s.foot_force[i];
            if (f.norm() < 1e-12) continue;
            const double slope = terrain::slope_at(hf, foot_position(s, i, cfg).x());
            const double inv = 1.0 / std::sqrt(1.0 + slope * slope);
            const Vec2 n(-slope * inv, inv);
            const Vec2 t(inv, slope * inv);
            const double fn = f.dot(n);
            const double ft = f.dot(t);
            CHECK(fn >= -1e-9);  // no attractive contacts
            CHECK(std::abs(ft) <= p.friction * fn + 1e-9);
        }
    }
}

TEST_CASE("control step runs exactly 8 substeps at the default rates") {
    SimConfig cfg;
    CHECK(cfg.substeps() == 8);
    WalkerParams p;
    Heightfield hf = flat_field();
    WalkerState s = settled_state(hf, p, cfg, 4.0, 1.0);
    const double t0 = s.t;
    Joints q_des;
    for (int j = 0; j < 4; ++j) q_des[j] = cfg.q_default[j];
    (void)step_control(s, q_des, hf, p, cfg);
    CHECK(s.t - t0 == doctest::Approx(8.0 * cfg.dt_sub));
}

TEST_CASE("equilibrium hold: re-commanding the settled target leaves the state unchanged") {
    SimConfig cfg;
    WalkerParams p;
    Heightfield hf = flat_field();
    WalkerState s = settled_state(hf, p, cfg, 4.0, 8.0);
    Joints q_des;
    for (int j = 0; j < 4; ++j) q_des[j] = cfg.q_default[j];
    const double x0 = s.x, z0 = s.z, th0 = s.theta;
    for (int k = 0; k < 50; ++k) (void)step_control(s, q_des, hf, p, cfg);
    CHECK(std::abs(s.x - x0) < 1e-6);
    CHECK(std::abs(s.z - z0) < 1e-6);
    CHECK(std::abs(s.theta - th0) < 1e-6);
}

TEST_CASE("termination: pitch beyond 90 degrees reports fell") {
    SimConfig cfg;
    Heightfield hf = flat_field();
    WalkerState s;
    place_on_terrain(s, hf, 4.0, cfg);
    s.theta = 91.0 * M_PI / 180.0;
    CHECK(check_termination(s, hf, cfg) == Termination::Fell);
    s.theta = 0.0;
    CHECK(check_termination(s, hf, cfg) == Termination::Alive);
}

TEST_CASE("termination: body inside terrain reports collided") {
    SimConfig cfg;
    Heightfield hf = terrain::generate_terrain(TerrainKind::DiscreteObstacles, 1.0, 3, {});
    // place the body center below the obstacle top somewhere over an obstacle
    WalkerState s;
    place_on_terrain(s, hf, 0.5, cfg);
    double x_obs = 0.0;
    for (std::size_t i = 0; i < hf.samples.size(); ++i) {
        if (hf.samples[i] > 0.2) {
            x_obs = static_cast<double>(i) * hf.dx;
            break;
        }
    }
    s.x = x_obs;
    s.z = terrain::height_at(hf, x_obs) - 0.05;
    CHECK(check_termination(s, hf, cfg) == Termination::Collided);
}

TEST_CASE("pushes: fire at the schedule with 0.3 m/s magnitude, twice in 30 s") {
    SimConfig cfg;
    PushSchedule sched;
    WalkerState s;
    Rng rng(9);
    int count = 0;
    const double dt = cfg.dt_control();
    for (int k = 0; k < static_cast<int>(30.0 / dt); ++k) {
        s.t += dt;
        const double vx0 = s.vx, vz0 = s.vz;
        if (apply_push(s, sched, rng)) {
            ++count;
            const double dvx = s.vx - vx0, dvz = s.vz - vz0;
            CHECK(std::sqrt(dvx * dvx + dvz * dvz) == doctest::Approx(0.3));
        } else {
            CHECK(s.vx == vx0);
            CHECK(s.vz == vz0);
        }
    }
    CHECK(count == 2);
}

TEST_CASE("randomize_params: 10k draws stay inside the published ranges") {
    Rng rng(123);
    RandomizationRanges r;
    double kp_min = 1e9, kp_max = -1e9, kp_sum = 0.0;
    for (int k = 0; k < 10000; ++k) {
        WalkerParams p = randomize_params(rng, r);
        CHECK(p.added_mass >= r.added_mass_lo);
        CHECK(p.added_mass <= r.added_mass_hi);
        CHECK(p.com_offset >= r.com_lo);
        CHECK(p.com_offset <= r.com_hi);
        CHECK(p.friction >= r.friction_lo);
        CHECK(p.friction <= r.friction_hi);
        CHECK(p.motor_strength >= r.strength_lo);
        CHECK(p.motor_strength <= r.strength_hi);
        CHECK(p.kp >= r.kp_lo);
        CHECK(p.kp <= r.kp_hi);
        CHECK(p.kd >= r.kd_lo);
        CHECK(p.kd <= r.kd_hi);
        kp_min = std::min(kp_min, p.kp);
        kp_max = std::max(kp_max, p.kp);
        kp_sum += p.kp;
    }
    CHECK(kp_sum / 10000.0 == doctest::Approx(40.0).epsilon(0.01));
    CHECK(kp_min < 35.5);
    CHECK(kp_max > 44.5);
}

TEST_CASE("fixed seed gives identical randomized params") {
    Rng a(7), b(7);
    WalkerParams pa = randomize_params(a);
    WalkerParams pb = randomize_params(b);
    CHECK(pa.added_mass == pb.added_mass);
    CHECK(pa.com_offset == pb.com_offset);
    CHECK(pa.friction == pb.friction);
    CHECK(pa.kp == pb.kp);
}

TEST_CASE("determinism: same action sequence gives bit-identical trajectories") {
    SimConfig cfg;
    WalkerParams p;
    Heightfield hf = terrain::add_fractal(flat_field(), 0.03, 5);
    auto run = [&]() {
        WalkerState s;
        place_on_terrain(s, hf, 4.0, cfg);
        Rng rng(3);
        Joints q_des;
        for (int k = 0; k < 200; ++k) {
            for (int j = 0; j < 4; ++j) {
                q_des[j] = cfg.q_default[j] +
                           (j % 2 == 0 ? rng.uniform(-0.3, 0.3) : rng.uniform(-0.04, 0.04));
            }
            (void)step_control(s, q_des, hf, p, cfg);
        }
        return s;
    };
    WalkerState a = run();
    WalkerState b = run();
    CHECK(a.x == b.x);
    CHECK(a.z == b.z);
    CHECK(a.theta == b.theta);
    CHECK((a.q - b.q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scripted gait oracle: the walker advances over 2 s of open-loop cycles") {
    SimConfig cfg;
    WalkerParams p;
    Heightfield hf = flat_field();
    visloco::testing::ScriptedGait gait;
    WalkerState s;
    gait.settle(s, hf, 0.5, p, cfg);
    REQUIRE(check_termination(s, hf, cfg) == Termination::Alive);
    const double x0 = s.x;
    const double t0 = s.t;
    double cycle_mark = x0;
    int cycles_checked = 0;
    while (s.t - t0 < 2.0) {
        (void)step_control(s, gait.target(s.t - t0 + gait.start_phase()), hf, p, cfg);
        REQUIRE(check_termination(s, hf, cfg) == Termination::Alive);
        const double u = std::fmod(s.t - t0 + gait.start_phase(), gait.period());
        // compare positions at matching phase (start of each glide)
        if (u < cfg.dt_control() && s.t - t0 > 0.1) {
            CHECK(s.x > cycle_mark);
            cycle_mark = s.x;
            ++cycles_checked;
        }
    }
    CHECK(cycles_checked >= 2);
    CHECK(s.x - x0 > 0.05);
}

TEST_CASE("invalid dt is rejected") {
    SimConfig cfg;
    WalkerParams p;
    Heightfield hf = flat_field();
    WalkerState s;
    CHECK_THROWS_AS(step_physics(s, Joints::Zero(), hf, p, cfg, 0.0), std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "visloco/observe.hpp"

#include <map>

using namespace visloco;
using namespace visloco::obs;
using sim::SimConfig;
using sim::WalkerState;
using terrain::Heightfield;
using terrain::TerrainKind;

namespace {

Heightfield flat_field() { return terrain::generate_terrain(TerrainKind::Flat, 0.0, 0, {}); }

}  // namespace

TEST_CASE("proprio: rest state has default joints and zero rates") {
    SimConfig cfg;
    Heightfield hf = flat_field();
    WalkerState s;
    sim::place_on_terrain(s, hf, 4.0, cfg);
    Proprioception p = proprio(s, sim::Joints::Zero());
    for (int j = 0; j < 4; ++j) {
        CHECK(p.q[j] == doctest::Approx(cfg.q_default[j]));
        CHECK(p.qd[j] == 0.0);
    }
    CHECK(p.omega == 0.0);
    CHECK(p.pitch == 0.0);
    CHECK(p.last_action.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("proprio: qd is the integrator's finite difference of q") {
    SimConfig cfg;
    Heightfield hf = flat_field();
    sim::WalkerParams params;
    WalkerState s;
    sim::place_on_terrain(s, hf, 4.0, cfg);
    sim::Joints q_des;
    q_des << 0.2, 0.24, -0.1, 0.26;
    for (int k = 0; k < 10; ++k) {
        sim::step_physics(s, sim::pd_torque(q_des, s.q, s.qd, params, cfg), hf, params, cfg,
                          cfg.dt_sub);
    }
    const sim::Joints q_before = s.q;
    sim::step_physics(s, sim::pd_torque(q_des, s.q, s.qd, params, cfg), hf, params, cfg,
                      cfg.dt_sub);
    // semi-implicit Euler: q' = q + qd' * dt exactly
    const sim::Joints fd = (s.q - q_before) / cfg.dt_sub;
    CHECK((fd - s.qd).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("proprio: vector round trip is the identity") {
    Proprioception p;
    p.q << 0.1, 0.2, 0.3, 0.4;
    p.qd << -1.0, 2.0, -3.0, 4.0;
    p.omega = 0.7;
    p.pitch = -0.3;
    p.last_action << 9.0, 8.0, 7.0, 6.0;
    Proprioception q = Proprioception::from_vector(p.to_vector());
    CHECK(q.to_vector() == p.to_vector());
}

TEST_CASE("scandots: flat terrain with body at 0.3 gives -0.3 everywhere") {
    SimConfig cfg;
    Heightfield hf = flat_field();
    WalkerState s;
    s.x = 4.0;
    s.z = 0.3;
    ScanLayout layout = ScanLayout::make_default();
    CHECK(layout.size() == 16);
    CHECK(layout.offsets.front() == doctest::Approx(-0.4));
    CHECK(layout.offsets.back() == doctest::Approx(0.8));
    Vec m = scandots(s, hf, layout);
    for (int i = 0; i < 16; ++i) CHECK(m[i] == doctest::Approx(-0.3));
}

TEST_CASE("scandots: straddling a 0.2 m step separates front and rear dots") {
    Heightfield hf = flat_field();
    for (std::size_t i = 0; i < hf.samples.size(); ++i) {
        if (static_cast<double>(i) * hf.dx >= 4.0) hf.samples[i] = 0.2;
    }
    WalkerState s;
    s.x = 4.0;
    s.z = 0.5;
    ScanLayout layout = ScanLayout::make_default();
    Vec m = scandots(s, hf, layout);
    CHECK(m[0] == doctest::Approx(-0.5));        // rear dot over the lower level
    CHECK(m[15] == doctest::Approx(-0.3));       // front dot over the upper level
    CHECK(m[15] - m[0] == doctest::Approx(0.2));
}

TEST_CASE("scandots: translating body and terrain together is invariant") {
    Heightfield hf = terrain::add_fractal(flat_field(), 0.05, 3);
    Heightfield shifted = hf;
    shifted.x0 = hf.x0 + 2.5;
    WalkerState s;
    s.x = 3.0;
    s.z = 0.3;
    WalkerState s2 = s;
    s2.x = 3.0 + 2.5;
    ScanLayout layout = ScanLayout::make_default();
    Vec a = scandots(s, hf, layout);
    Vec b = scandots(s2, shifted, layout);
    CHECK((a - b).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("scandots flag out-of-terrain queries") {
    Heightfield hf = flat_field();
    WalkerState s;
    s.x = 0.1;  // rear offsets leave the field
    s.z = 0.3;
    bool clipped = false;
    (void)scandots(s, hf, ScanLayout::make_default(), &clipped);
    CHECK(clipped);
    s.x = 4.0;
    (void)scandots(s, hf, ScanLayout::make_default(), &clipped);
    CHECK_FALSE(clipped);
}

TEST_CASE("raycast: straight-down ray over flat ground reads the camera height") {
    SimConfig cfg;
    cfg.cam_x = 0.0;
    cfg.cam_z = 0.3;
    Heightfield hf = flat_field();
    WalkerState s;
    s.x = 4.0;
    s.z = 0.0;
    DepthCamera cam;
    cam.rays = 4;
    cam.fan = 0.0;
    cam.mount_pitch = M_PI / 2.0;  // straight down
    Vec d = raycast_depth(s, hf, cam, cfg);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(d[k] - 0.3) < 0.0005);
}

TEST_CASE("raycast: closed form h / sin(phi) on flat ground for the whole fan") {
    SimConfig cfg;
    Heightfield hf = flat_field();
    WalkerState s;
    s.x = 2.0;
    s.z = 0.25;
    DepthCamera cam;
    const sim::Vec2 origin = sim::camera_position(s, cfg);
    Vec d = raycast_depth(s, hf, cam, cfg);
    for (int k = 0; k < cam.rays; ++k) {
        const double angle = (0.0 - cam.mount_pitch + 0.5 * cam.fan) -
                             cam.fan * static_cast<double>(k) / (cam.rays - 1);
        if (angle >= 0.0 || origin.y() / std::sin(-angle) > cam.max_range) {
            CHECK(d[k] == kDepthHole);
        } else {
            CHECK(std::abs(d[k] - origin.y() / std::sin(-angle)) < 0.0005);
        }
    }
}

TEST_CASE("raycast: ray over a pit reaches the pit floor rather than a hole") {
    SimConfig cfg;
    cfg.cam_x = 0.0;
    cfg.cam_z = 0.4;
    Heightfield hf = flat_field();
    // dig a wide pit ahead of the camera
    for (std::size_t i = 0; i < hf.samples.size(); ++i) {
        const double x = static_cast<double>(i) * hf.dx;
        if (x >= 4.2 && x <= 6.0) hf.samples[i] = terrain::kGapDepth;
    }
    WalkerState s;
    s.x = 4.0;
    s.z = 0.0;
    DepthCamera cam;
    cam.rays = 2;
    cam.fan = 0.0;
    cam.mount_pitch = 45.0 * M_PI / 180.0;
    Vec d = raycast_depth(s, hf, cam, cfg);
    // 45 degrees down from (4.0, 0.4): crosses the rim at x=4.2 well above
    // ground and lands on the pit floor at z=-1, i.e. depth 1.4 * sqrt(2)
    CHECK(d[0] > 1.2);
    CHECK(d[0] != kDepthHole);
    CHECK(std::abs(d[0] - 1.4 * std::sqrt(2.0)) < 0.05);
}

TEST_CASE("preprocess: constant scan stays constant") {
    Vec raw = Vec::Constant(64, 1.7);
    auto out = preprocess_depth(raw);
    REQUIRE(out.has_value());
    CHECK(out->size() == 16);
    for (int i = 0; i < 16; ++i) CHECK((*out)[i] == doctest::Approx(1.7));
}

TEST_CASE("preprocess: single hole between equal values fills with that value") {
    Vec raw = Vec::Constant(64, 1.0);
    raw[30] = kDepthHole;
    auto out = preprocess_depth(raw);
    REQUIRE(out.has_value());
    for (int i = 0; i < 16; ++i) CHECK((*out)[i] == doctest::Approx(1.0));
}

TEST_CASE("preprocess: nearest-neighbor fill with ties to the nearer index") {
    DepthPreprocess pp;
    pp.crop_leading = 0;
    pp.output = 4;
    Vec raw(4);
    raw << 2.0, kDepthHole, kDepthHole, 4.0;
    auto out = preprocess_depth(raw, pp);
    REQUIRE(out.has_value());
    CHECK((*out)[0] == doctest::Approx(2.0));
    CHECK((*out)[1] == doctest::Approx(2.0));
    CHECK((*out)[2] == doctest::Approx(4.0));
    CHECK((*out)[3] == doctest::Approx(4.0));

    // equidistant donors: the earlier index wins
    Vec tie(3);
    tie << 5.0, kDepthHole, 9.0;
    pp.output = 3;
    auto filled = preprocess_depth(tie, pp);
    REQUIRE(filled.has_value());
    CHECK((*filled)[1] == doctest::Approx(5.0));
}

TEST_CASE("preprocess: hole filling is idempotent") {
    DepthPreprocess pp;
    pp.crop_leading = 0;
    pp.output = 6;
    Vec raw(6);
    raw << 1.0, kDepthHole, 3.0, kDepthHole, kDepthHole, 2.0;
    auto once = preprocess_depth(raw, pp);
    REQUIRE(once.has_value());
    auto twice = preprocess_depth(*once, pp);
    REQUIRE(twice.has_value());
    CHECK((*once - *twice).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 6; ++i) CHECK((*once)[i] != kDepthHole);
}

TEST_CASE("preprocess: all-hole scan yields nothing") {
    Vec raw = Vec::Constant(64, kDepthHole);
    CHECK_FALSE(preprocess_depth(raw).has_value());
}

TEST_CASE("latency: 100 ms interval at 50 Hz repeats each scan ~5 ticks") {
    LatencyConfig cfg;
    cfg.interval_lo = cfg.interval_hi = 0.100;
    cfg.latency_lo = cfg.latency_hi = 0.010;
    LatencyModel model(cfg);
    Rng rng(1);
    model.reset(0.0, rng);
    int counter = 0;
    std::map<double, int> run_lengths;
    double prev_ts = -1.0;
    int run = 0;
    for (int tick = 0; tick <= 100; ++tick) {
        const double now = tick * 0.02;
        model.advance(now, rng, [&](double) { return Vec::Constant(1, ++counter); });
        if (tick == 0) continue;  // the first capture is still in flight
        REQUIRE(model.has_scan());
        if (model.current_timestamp() == prev_ts) {
            ++run;
        } else {
            if (prev_ts >= 0.0) run_lengths[prev_ts] = run;
            prev_ts = model.current_timestamp();
            run = 1;
        }
    }
    for (auto& [ts, len] : run_lengths) CHECK(len == 5);
}

TEST_CASE("latency: zero latency and jitter delivers the same tick's scan") {
    LatencyConfig cfg;
    cfg.interval_lo = cfg.interval_hi = 0.020;
    cfg.latency_lo = cfg.latency_hi = 0.0;
    LatencyModel model(cfg);
    Rng rng(2);
    model.reset(0.0, rng);
    for (int tick = 0; tick < 20; ++tick) {
        const double now = tick * 0.02;
        model.advance(now, rng, [&](double ts) { return Vec::Constant(1, ts); });
        CHECK(model.current_timestamp() == doctest::Approx(now));
    }
}

TEST_CASE("latency: capture at t=0 with 30 ms latency first visible at the 40 ms tick") {
    LatencyConfig cfg;
    cfg.interval_lo = cfg.interval_hi = 10.0;  // only the t=0 capture matters
    cfg.latency_lo = cfg.latency_hi = 0.030;
    LatencyModel model(cfg);
    Rng rng(3);
    model.reset(0.0, rng);
    model.advance(0.0, rng, [](double) { return Vec::Constant(1, 42.0); });
    CHECK_FALSE(model.has_scan());
    model.advance(0.02, rng, [](double) { return Vec::Zero(1); });
    CHECK_FALSE(model.has_scan());
    model.advance(0.04, rng, [](double) { return Vec::Zero(1); });
    REQUIRE(model.has_scan());
    CHECK(model.current()[0] == 42.0);
    CHECK(model.current_timestamp() == 0.0);
}

TEST_CASE("latency: observed timestamps are non-decreasing") {
    LatencyModel model;
    Rng rng(7);
    model.reset(0.0, rng);
    double last = -1.0;
    for (int tick = 0; tick < 500; ++tick) {
        model.advance(tick * 0.02, rng, [](double ts) { return Vec::Constant(1, ts); });
        if (model.has_scan()) {
            CHECK(model.current_timestamp() >= last);
            last = model.current_timestamp();
        }
    }
    CHECK(last > 0.0);
}

TEST_CASE("depth pipeline: all-hole capture reuses the previous scan and flags it") {
    SimConfig cfg;
    DepthCamera cam;
    DepthPreprocess pp;
    LatencyConfig lat;
    lat.interval_lo = lat.interval_hi = 0.02;
    lat.latency_lo = lat.latency_hi = 0.0;
    DepthPipeline pipe(cam, pp, lat);
    Rng rng(5);
    pipe.reset(0.0, rng);

    Heightfield hf = flat_field();
    WalkerState s;
    s.x = 4.0;
    s.z = 0.3;
    pipe.advance(s, hf, cfg, rng);
    REQUIRE(pipe.has_scan());
    Vec first = pipe.processed();
    CHECK_FALSE(pipe.hole_flag());

    // pitch the body up so every ray misses within range
    s.theta = 80.0 * M_PI / 180.0;
    s.t += 0.02;
    pipe.advance(s, hf, cfg, rng);
    CHECK(pipe.hole_flag());
    CHECK((pipe.processed() - first).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("obs noise: a=1 b=0 sigma=0 is the identity") {
    NoiseTableEntry e;
    Rng rng(1);
    Vec o(3);
    o << 0.5, -1.0, 2.0;
    Vec out = apply_entry(e, o, &rng);
    CHECK((out - o).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("obs noise: scandot scale 5 maps 0.1 to 0.5 with sigma 0") {
    NoiseTableEntry e{5.0, 0.0, 0.0};
    CHECK(apply_entry(e, 0.1, nullptr) == doctest::Approx(0.5));
}

TEST_CASE("obs noise: sample std matches sigma within 2% over 1e5 draws") {
    NoiseTableEntry e{1.0, 0.0, 0.05};
    Rng rng(99);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = apply_entry(e, 0.0, &rng);
        sum += v;
        sum2 += v * v;
    }
    const double std = std::sqrt(sum2 / n - (sum / n) * (sum / n));
    CHECK(std == doctest::Approx(0.05).epsilon(0.02));
}

TEST_CASE("corrupt_elevation: all scales zero is the identity") {
    ElevNoiseSpec spec;
    spec.offset_sigma = 0.0;
    spec.drift_step = 0.0;
    spec.outlier_prob = 0.0;
    spec.jitter_sigma = 0.0;
    spec.latency_steps = 0;
    ElevationCorruptor corr(spec);
    Rng rng(1);
    corr.reset(rng);
    SimConfig cfg;
    Heightfield hf = terrain::add_fractal(flat_field(), 0.05, 9);
    WalkerState s;
    s.x = 4.0;
    s.z = 0.3;
    ScanLayout layout = ScanLayout::make_default();
    Vec clean = scandots(s, hf, layout);
    Vec noisy = corr.step(s, hf, layout, rng);
    CHECK((noisy - clean).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("corrupt_elevation: outlier fraction matches its probability") {
    ElevNoiseSpec spec;
    spec.offset_sigma = 0.0;
    spec.jitter_sigma = 0.0;
    spec.outlier_prob = 0.02;
    Rng rng(4);
    const int n = 100000;
    Vec clean = Vec::Zero(n);
    Vec noisy = corrupt_values(clean, spec, 0.0, rng);
    int corrupted = 0;
    for (int i = 0; i < n; ++i) {
        if (std::abs(noisy[i]) > 1e-12) ++corrupted;
    }
    const double frac = static_cast<double>(corrupted) / n;
    CHECK(frac > 0.018);
    CHECK(frac < 0.022);
}

TEST_CASE("corrupt_elevation: offset-only spec shifts by an episode constant") {
    ElevNoiseSpec spec;
    spec.offset_sigma = 0.05;
    spec.drift_step = 0.0;
    spec.outlier_prob = 0.0;
    spec.jitter_sigma = 0.0;
    spec.latency_steps = 0;
    ElevationCorruptor corr(spec);
    Rng rng(10);
    corr.reset(rng);
    SimConfig cfg;
    Heightfield hf = flat_field();
    ScanLayout layout = ScanLayout::make_default();
    WalkerState s;
    s.x = 4.0;
    s.z = 0.3;
    std::vector<double> deltas;
    for (int step = 0; step < 20; ++step) {
        s.x += 0.01;
        Vec clean = scandots(s, hf, layout);
        Vec noisy = corr.step(s, hf, layout, rng);
        for (int i = 0; i < layout.size(); ++i) deltas.push_back(noisy[i] - clean[i]);
    }
    for (double d : deltas) CHECK(d == doctest::Approx(deltas.front()));
    CHECK(std::abs(deltas.front()) > 1e-6);  // a real offset was drawn
}

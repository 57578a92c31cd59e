#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "visloco/phase2.hpp"

using namespace visloco;
using namespace visloco::phase2;
using policy::PolicyDims;
using policy::PolicyObs;

namespace {

PolicyDims tiny_dims() {
    PolicyDims d;
    d.gamma_dim = 8;
    d.z_dim = 4;
    d.gru_hidden = 16;
    d.enc_hidden = 16;
    d.base_hidden = 16;
    d.est_gru_hidden = 12;
    return d;
}

EnvConfig depth_env_config() {
    EnvConfig cfg;
    cfg.finalize();
    cfg.episode_seconds = 4.0;
    cfg.enable_depth = true;
    return cfg;
}

terrain::TerrainGrid flat_stairs_grid() {
    terrain::GridConfig g;
    g.kinds = {terrain::TerrainKind::Flat, terrain::TerrainKind::StairsUp};
    g.cols = 4;
    return terrain::build_grid(g, 21);
}

}  // namespace

TEST_CASE("exact-copy student fed teacher observations has zero action gap") {
    auto dims = tiny_dims();
    Rng rng(7);
    policy::MonolithicPolicy teacher(dims, rng);
    policy::MonolithicStudent student(dims, teacher, rng);
    student.depth_encoder() = teacher.encoder();  // full copy, not just core+head

    EnvConfig cfg;
    cfg.finalize();
    cfg.episode_seconds = 2.0;
    Env env(cfg, 4);
    auto grid = flat_stairs_grid();
    env.set_cell(&grid.at(0, 0), grid.row_kinds[0], 0, 0);
    env.reset();

    Vec th = Vec::Zero(teacher.hidden_dim());
    Vec sh = Vec::Zero(student.hidden_dim());
    double loss = 0.0;
    for (int t = 0; t < 48; ++t) {
        PolicyObs o = env.observe_teacher();  // identical inputs for both
        const Vec a1 = teacher.act(o, th, nullptr).mean;
        const Vec a2 = student.act(o, sh);
        loss += (a1 - a2).squaredNorm();
        const StepResult res = env.step(a2);
        if (res.done) {
            env.reset();
            th.setZero();
            sh.setZero();
        }
    }
    CHECK(loss == 0.0);
}

TEST_CASE("dagger: exactly one parameter update per iteration") {
    auto dims = tiny_dims();
    Rng rng(9);
    policy::MonolithicPolicy teacher(dims, rng);
    policy::MonolithicStudent student(dims, teacher, rng);
    auto grid = flat_stairs_grid();
    DistillConfig dc;
    dc.num_envs = 2;
    dc.seed = 3;
    MonolithicDistiller distiller(teacher, student, depth_env_config(), grid, dc);
    for (int it = 1; it <= 5; ++it) {
        (void)distiller.iterate();
        CHECK(distiller.adam_steps() == it);
    }
}

TEST_CASE("teacher parameters are bit-identical across dagger iterations") {
    auto dims = tiny_dims();
    Rng rng(21);
    policy::MonolithicPolicy teacher(dims, rng);
    policy::MonolithicStudent student(dims, teacher, rng);
    auto grid = flat_stairs_grid();
    DistillConfig dc;
    dc.num_envs = 2;
    dc.seed = 4;
    MonolithicDistiller distiller(teacher, student, depth_env_config(), grid, dc);
    const std::uint64_t before = distiller.teacher_hash();
    for (int it = 0; it < 10; ++it) (void)distiller.iterate();
    CHECK(distiller.teacher_hash() == before);
}

TEST_CASE("convex regression oracle: a linear student nails a linear teacher") {
    Rng rng(3);
    const int in = 6, out = 4;
    nn::Linear teacher(out, in);
    teacher.init(rng);
    nn::Linear student(out, in);
    student.init(rng);
    std::vector<nn::ParamView> views;
    student.collect(views, "student");
    nn::AdamConfig ac;
    ac.lr = 5e-3;
    nn::Adam adam(ac, nn::total_size(views));
    double mse = 1.0;
    for (int it = 0; it < 5000; ++it) {
        nn::zero_grads(views);
        mse = 0.0;
        for (int b = 0; b < 8; ++b) {
            Vec x(in);
            for (int i = 0; i < in; ++i) x[i] = rng.normal();
            const Vec target = teacher.forward(x);
            const Vec pred = student.forward(x);
            const Vec diff = pred - target;
            mse += diff.squaredNorm() / 8.0;
            (void)student.backward(x, 2.0 * diff / 8.0);
        }
        adam.update(views);
        if (mse < 1e-7) break;
    }
    CHECK(mse < 1e-6);
}

TEST_CASE("rma student with exact latents reproduces the teacher action") {
    auto dims = tiny_dims();
    Rng rng(13);
    policy::RmaPolicy teacher(dims, rng);
    policy::RmaStudent student(dims, teacher, rng);

    PolicyObs o;
    o.x = Vec::Zero(dims.proprio);
    o.terrain = Vec::Zero(dims.terrain);
    o.priv = Vec::Zero(dims.priv);
    for (int i = 0; i < dims.proprio; ++i) o.x[i] = rng.normal();
    for (int i = 0; i < dims.terrain; ++i) o.terrain[i] = rng.normal();
    for (int i = 0; i < dims.priv; ++i) o.priv[i] = rng.normal();
    o.cmd = 0.35;

    Vec th = Vec::Zero(teacher.hidden_dim());
    const Vec a_teacher = teacher.act(o, th, nullptr).mean;
    Vec th2 = Vec::Zero(teacher.hidden_dim());
    const Vec gamma = teacher.terrain_latent(o, th2);
    const Vec z = teacher.extrinsics_latent(o);
    Vec in(dims.base_input());
    in.head(dims.proprio) = o.x;
    in.segment(dims.proprio, dims.gamma_dim) = gamma;
    in.segment(dims.proprio + dims.gamma_dim, dims.z_dim) = z;
    in[dims.base_input() - 1] = o.cmd;
    const Vec a_student_base = student.frozen_base().forward(in);
    CHECK((a_teacher - a_student_base).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rma distillation: base MLP hash is frozen, gradients touch only estimators") {
    auto dims = tiny_dims();
    Rng rng(17);
    policy::RmaPolicy teacher(dims, rng);
    policy::RmaStudent student(dims, teacher, rng);
    auto grid = flat_stairs_grid();
    DistillConfig dc;
    dc.num_envs = 2;
    dc.seed = 6;
    RmaDistiller distiller(teacher, student, depth_env_config(), grid, dc);
    const std::uint64_t base_before = distiller.base_hash();
    const std::uint64_t teacher_before = distiller.teacher_hash();
    for (int it = 0; it < 8; ++it) {
        IterStats s = distiller.iterate();
        CHECK_FALSE(s.skipped);
        CHECK(std::isfinite(s.gamma_mse));
    }
    CHECK(distiller.base_hash() == base_before);
    CHECK(distiller.teacher_hash() == teacher_before);
}

TEST_CASE("detach: gradients of a window ignore anything before its boundary") {
    auto dims = tiny_dims();
    Rng rng(23);
    policy::MonolithicPolicy teacher(dims, rng);
    policy::MonolithicStudent student(dims, teacher, rng);
    auto views = student.params();

    std::vector<PolicyObs> warm, window;
    std::vector<Vec> dmean;
    for (int t = 0; t < 6; ++t) {
        PolicyObs o;
        o.x = Vec::Zero(dims.proprio);
        o.terrain = Vec::Zero(dims.terrain);
        o.priv = Vec::Zero(dims.priv);
        for (int i = 0; i < dims.proprio; ++i) o.x[i] = rng.normal();
        for (int i = 0; i < dims.terrain; ++i) o.terrain[i] = rng.normal();
        o.cmd = 0.3;
        (t < 3 ? warm : window).push_back(o);
    }
    for (int t = 0; t < 3; ++t) {
        Vec d(dims.action);
        for (int j = 0; j < dims.action; ++j) d[j] = rng.normal();
        dmean.push_back(d);
    }

    // boundary hidden from the warmup window
    Vec h = Vec::Zero(student.hidden_dim());
    for (const auto& o : warm) (void)student.act(o, h);

    auto window_grads = [&](const Vec& h0) {
        nn::zero_grads(views);
        student.begin_segment(h0, 3);
        for (int t = 0; t < 3; ++t) {
            (void)student.forward_step(t, window[static_cast<std::size_t>(t)], false);
        }
        student.backward_segment(dmean);
        return nn::flatten_grads(views);
    };
    const Vec g1 = window_grads(h);
    warm[1].x[0] += 1.0;  // perturb a pre-boundary observation
    const Vec g2 = window_grads(h);  // detached hidden unchanged
    CHECK((g1 - g2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("z estimator converges on constant extrinsics over a flat episode") {
    auto dims = tiny_dims();
    Rng rng(29);
    policy::RmaPolicy teacher(dims, rng);
    policy::RmaStudent student(dims, teacher, rng);
    terrain::GridConfig g;
    g.kinds = {terrain::TerrainKind::Flat};
    g.cols = 1;
    g.apply_fractal = false;
    auto grid = terrain::build_grid(g, 1);
    EnvConfig env_cfg = depth_env_config();
    env_cfg.randomize_dynamics = false;  // e_t constant across episodes
    DistillConfig dc;
    dc.num_envs = 2;
    dc.seed = 8;
    dc.lr = 2e-3;
    RmaDistiller distiller(teacher, student, env_cfg, grid, dc);
    double z_mse = 1.0;
    for (int it = 0; it < 400; ++it) z_mse = distiller.iterate().z_mse;
    CHECK(z_mse < 2.5e-3);  // ||z_hat - z|| < 0.05
}

TEST_CASE("dagger loss (moving average) halves on the flat+stairs grid") {
    auto dims = tiny_dims();
    Rng rng(41);
    policy::MonolithicPolicy teacher(dims, rng);
    policy::MonolithicStudent student(dims, teacher, rng);
    auto grid = flat_stairs_grid();
    DistillConfig dc;
    dc.num_envs = 2;
    dc.seed = 12;
    dc.lr = 1e-3;
    MonolithicDistiller distiller(teacher, student, depth_env_config(), grid, dc);
    auto window_mean = [&](int iters) {
        double acc = 0.0;
        for (int it = 0; it < iters; ++it) acc += distiller.iterate().action_mse;
        return acc / iters;
    };
    const double initial = window_mean(20);
    (void)window_mean(260);  // train
    const double final = window_mean(20);
    CHECK(final <= 0.5 * initial);
}

TEST_CASE("action-gap statistics: identical policies give zero, zero-action student reports "
          "the teacher's norm") {
    auto dims = tiny_dims();
    Rng rng(51);
    policy::MonolithicPolicy teacher(dims, rng);

    EnvConfig cfg;
    cfg.finalize();
    cfg.episode_seconds = 0.02;  // single control step
    auto grid = flat_stairs_grid();

    auto teacher_act = [&](const PolicyObs& o, Vec& h) { return teacher.act(o, h, nullptr).mean; };
    // identical teacher on both sides, but the student channel must carry the
    // same content; use a blind setup so both see zeros
    EnvConfig blind_cfg = cfg;
    blind_cfg.baseline = Baseline::Blind;
    auto gap0 = evaluate_distillation(teacher_act, teacher.hidden_dim(), teacher_act,
                                      teacher.hidden_dim(), blind_cfg, grid, 3, 99);
    CHECK(gap0.max_gap == 0.0);

    auto zero_act = [&](const PolicyObs&, Vec&) { return Vec::Zero(4).eval(); };
    auto gap = evaluate_distillation(teacher_act, teacher.hidden_dim(), zero_act, 1, blind_cfg,
                                     grid, 1, 123);
    // with one step per episode, eta-hat is the teacher action norm at s0
    Rng seeder(123);
    Env env(blind_cfg, seeder.derive(0).seed());
    env.set_cell(&grid.at(0, 0), grid.row_kinds[0], 0, 0);
    env.reset();
    Vec th = Vec::Zero(teacher.hidden_dim());
    const Vec a1 = teacher.act(env.observe_teacher(), th, nullptr).mean;
    CHECK(gap.max_gap == doctest::Approx(a1.norm()).epsilon(1e-12));
}

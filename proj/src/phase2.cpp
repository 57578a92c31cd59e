#include "visloco/phase2.hpp"

#include <cmath>
#include <ostream>

namespace visloco::phase2 {

namespace {

// Shared env setup: envs cycle through grid rows, mid-difficulty start.
template <typename Self>
void setup_envs(Self& self, const EnvConfig& env_cfg, const terrain::TerrainGrid& grid,
                const DistillConfig& cfg, std::vector<std::unique_ptr<Env>>& envs,
                std::vector<int>& rows) {
    (void)self;
    Rng seeder(cfg.seed);
    for (int e = 0; e < cfg.num_envs; ++e) {
        envs.push_back(std::make_unique<Env>(env_cfg, seeder.derive(0xD15 + e).seed()));
        const int row = e % grid.rows();
        rows.push_back(row);
        const int col = grid.cols > 1 ? (e / grid.rows()) % grid.cols : 0;
        envs.back()->set_cell(&grid.at(row, col), grid.row_kinds[static_cast<std::size_t>(row)],
                              row, col);
        envs.back()->reset();
    }
}

}  // namespace

MonolithicDistiller::MonolithicDistiller(policy::MonolithicPolicy& teacher,
                                         policy::MonolithicStudent& student,
                                         const EnvConfig& env_cfg,
                                         const terrain::TerrainGrid& grid,
                                         const DistillConfig& cfg)
    : teacher_(teacher), student_(student), grid_(grid), cfg_(cfg) {
    setup_envs(*this, env_cfg, grid_, cfg, envs_, rows_);
    for (int e = 0; e < cfg.num_envs; ++e) {
        teacher_h_.push_back(Vec::Zero(teacher.hidden_dim()));
        student_h_.push_back(Vec::Zero(student.hidden_dim()));
        fresh_.push_back(1);
    }
    nn::AdamConfig ac;
    ac.lr = cfg.lr;
    adam_.reset(ac, nn::total_size(student.params()));
}

IterStats MonolithicDistiller::iterate() {
    IterStats stats;
    const auto views = student_.params();
    nn::zero_grads(views);
    const double inv_n = 1.0 / static_cast<double>(cfg_.num_envs * cfg_.seg_len);
    std::vector<Vec> dmean(static_cast<std::size_t>(cfg_.seg_len));
    long steps = 0;

    for (int e = 0; e < cfg_.num_envs; ++e) {
        Env& env = *envs_[static_cast<std::size_t>(e)];
        student_.begin_segment(student_h_[static_cast<std::size_t>(e)], cfg_.seg_len);
        Vec& th = teacher_h_[static_cast<std::size_t>(e)];
        for (int t = 0; t < cfg_.seg_len; ++t) {
            const bool reset_now = fresh_[static_cast<std::size_t>(e)] != 0;
            if (reset_now) th.setZero();
            fresh_[static_cast<std::size_t>(e)] = 0;

            const policy::PolicyObs obs_t = env.observe_teacher();
            const policy::PolicyObs obs_s = env.observe_student();
            const Vec a1 = teacher_.act(obs_t, th, nullptr).mean;
            const Vec a2 = student_.forward_step(t, obs_s, reset_now);
            const Vec diff = a2 - a1;
            const double gap = diff.norm();
            stats.action_mse += diff.squaredNorm();
            stats.max_action_gap = std::max(stats.max_action_gap, gap);
            dmean[static_cast<std::size_t>(t)] = 2.0 * diff * inv_n;
            ++steps;

            const StepResult res = env.step(a2);
            if (res.done) {
                env.reset();
                fresh_[static_cast<std::size_t>(e)] = 1;
            }
        }
        student_.backward_segment(dmean);
        student_h_[static_cast<std::size_t>(e)] = student_.segment_hidden();
    }
    stats.action_mse /= static_cast<double>(steps);
    if (!std::isfinite(stats.action_mse)) {
        stats.skipped = true;
        return stats;
    }
    adam_.update(views);
    return stats;
}

std::uint64_t MonolithicDistiller::teacher_hash() { return nn::param_hash(teacher_.params()); }

RmaDistiller::RmaDistiller(policy::RmaPolicy& teacher, policy::RmaStudent& student,
                           const EnvConfig& env_cfg, const terrain::TerrainGrid& grid,
                           const DistillConfig& cfg)
    : teacher_(teacher), student_(student), grid_(grid), cfg_(cfg) {
    setup_envs(*this, env_cfg, grid_, cfg, envs_, rows_);
    for (int e = 0; e < cfg.num_envs; ++e) {
        teacher_h_.push_back(Vec::Zero(teacher.hidden_dim()));
        student_h_.push_back(Vec::Zero(student.hidden_dim()));
        fresh_.push_back(1);
    }
    nn::AdamConfig ac;
    ac.lr = cfg.lr;
    adam_.reset(ac, nn::total_size(student.params()));
}

IterStats RmaDistiller::iterate() {
    IterStats stats;
    const auto views = student_.params();
    nn::zero_grads(views);
    const double inv_n = 1.0 / static_cast<double>(cfg_.num_envs * cfg_.seg_len);
    std::vector<Vec> dgamma(static_cast<std::size_t>(cfg_.seg_len));
    std::vector<Vec> dz(static_cast<std::size_t>(cfg_.seg_len));
    long steps = 0;

    for (int e = 0; e < cfg_.num_envs; ++e) {
        Env& env = *envs_[static_cast<std::size_t>(e)];
        student_.begin_segment(student_h_[static_cast<std::size_t>(e)], cfg_.seg_len);
        Vec& th = teacher_h_[static_cast<std::size_t>(e)];
        for (int t = 0; t < cfg_.seg_len; ++t) {
            const bool reset_now = fresh_[static_cast<std::size_t>(e)] != 0;
            if (reset_now) th.setZero();
            fresh_[static_cast<std::size_t>(e)] = 0;

            const policy::PolicyObs obs_t = env.observe_teacher();
            const policy::PolicyObs obs_s = env.observe_student();
            const Vec gamma = teacher_.terrain_latent(obs_t, th);
            const Vec z = teacher_.extrinsics_latent(obs_t);
            const auto out = student_.forward_step(t, obs_s, reset_now);
            const Vec gdiff = out.gamma_hat - gamma;
            const Vec zdiff = out.z_hat - z;
            stats.gamma_mse += gdiff.squaredNorm();
            stats.z_mse += zdiff.squaredNorm();
            dgamma[static_cast<std::size_t>(t)] = 2.0 * gdiff * inv_n;
            dz[static_cast<std::size_t>(t)] = 2.0 * zdiff * inv_n;
            ++steps;

            const StepResult res = env.step(out.action);
            if (res.done) {
                env.reset();
                fresh_[static_cast<std::size_t>(e)] = 1;
            }
        }
        student_.backward_segment(dgamma, dz);
        student_h_[static_cast<std::size_t>(e)] = student_.segment_hidden();
    }
    stats.gamma_mse /= static_cast<double>(steps);
    stats.z_mse /= static_cast<double>(steps);
    if (!std::isfinite(stats.gamma_mse) || !std::isfinite(stats.z_mse)) {
        stats.skipped = true;
        return stats;
    }
    adam_.update(views);
    return stats;
}

std::uint64_t RmaDistiller::teacher_hash() { return nn::param_hash(teacher_.params()); }

ActionGapStats evaluate_distillation(
    const std::function<Vec(const policy::PolicyObs&, Vec&)>& teacher_act, int teacher_hidden,
    const std::function<Vec(const policy::PolicyObs&, Vec&)>& student_act, int student_hidden,
    const EnvConfig& env_cfg, const terrain::TerrainGrid& grid, int episodes, std::uint64_t seed) {
    ActionGapStats stats;
    std::vector<double> gaps;
    Rng seeder(seed);
    for (int ep = 0; ep < episodes; ++ep) {
        Env env(env_cfg, seeder.derive(ep).seed());
        const int row = ep % grid.rows();
        const int col = grid.cols > 1 ? (ep / grid.rows()) % grid.cols : 0;
        env.set_cell(&grid.at(row, col), grid.row_kinds[static_cast<std::size_t>(row)], row, col);
        env.reset();
        Vec th = Vec::Zero(teacher_hidden);
        Vec sh = Vec::Zero(student_hidden);
        for (int t = 0; t < env.max_episode_steps(); ++t) {
            const policy::PolicyObs obs_t = env.observe_teacher();
            const policy::PolicyObs obs_s = env.observe_student();
            const Vec a1 = teacher_act(obs_t, th);
            const Vec a2 = student_act(obs_s, sh);
            gaps.push_back((a1 - a2).norm());
            const StepResult res = env.step(a2);
            if (res.done) break;
        }
    }
    if (gaps.empty()) return stats;
    std::sort(gaps.begin(), gaps.end());
    stats.samples = static_cast<long>(gaps.size());
    stats.max_gap = gaps.back();
    stats.p95 = gaps[static_cast<std::size_t>(0.95 * (gaps.size() - 1))];
    double sum = 0.0;
    for (double g : gaps) sum += g;
    stats.mean = sum / static_cast<double>(gaps.size());
    return stats;
}

void write_distill_header(std::ostream& os) {
    os << "iter,action_mse,gamma_mse,z_mse,max_action_gap,skipped\n";
}

void write_distill_row(std::ostream& os, int iter, const IterStats& s) {
    os << iter << ',' << s.action_mse << ',' << s.gamma_mse << ',' << s.z_mse << ','
       << s.max_action_gap << ',' << (s.skipped ? 1 : 0) << "\n";
}

}  // namespace visloco::phase2

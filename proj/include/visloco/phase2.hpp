#pragma once

#include "visloco/env.hpp"
#include "visloco/policy.hpp"
#include "visloco/terrain.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace visloco::phase2 {

struct DistillConfig {
    int num_envs = 8;
    int seg_len = 24;  // student unroll per iteration
    double lr = 5e-4;
    std::uint64_t seed = 0;
};

struct IterStats {
    double action_mse = 0.0;  // mean ||a1 - a2||^2 per step
    double gamma_mse = 0.0;
    double z_mse = 0.0;
    double max_action_gap = 0.0;  // max ||a1 - a2|| this iteration
    bool skipped = false;
};

// DAgger for the monolithic student: the environment is stepped with the
// student's actions, the frozen teacher labels every visited state, one
// gradient step per unrolled window, hidden state detached between windows.
class MonolithicDistiller {
public:
    MonolithicDistiller(policy::MonolithicPolicy& teacher, policy::MonolithicStudent& student,
                        const EnvConfig& env_cfg, const terrain::TerrainGrid& grid,
                        const DistillConfig& cfg);

    IterStats iterate();
    Env& env(int i) { return *envs_[static_cast<std::size_t>(i)]; }
    std::uint64_t teacher_hash();
    long adam_steps() const { return adam_.step_count(); }

private:
    policy::MonolithicPolicy& teacher_;
    policy::MonolithicStudent& student_;
    terrain::TerrainGrid grid_;  // owned copy: cells must outlive the envs
    DistillConfig cfg_;
    std::vector<std::unique_ptr<Env>> envs_;
    std::vector<Vec> teacher_h_, student_h_;
    std::vector<unsigned char> fresh_;
    std::vector<int> rows_;
    nn::Adam adam_;
};

// Latent-supervision distillation for the RMA student: only the gamma / z
// estimators train; the base MLP stays the teacher's.
class RmaDistiller {
public:
    RmaDistiller(policy::RmaPolicy& teacher, policy::RmaStudent& student,
                 const EnvConfig& env_cfg, const terrain::TerrainGrid& grid,
                 const DistillConfig& cfg);

    IterStats iterate();
    Env& env(int i) { return *envs_[static_cast<std::size_t>(i)]; }
    std::uint64_t teacher_hash();
    std::uint64_t base_hash() const { return student_.base_hash(); }

private:
    policy::RmaPolicy& teacher_;
    policy::RmaStudent& student_;
    terrain::TerrainGrid grid_;  // owned copy: cells must outlive the envs
    DistillConfig cfg_;
    std::vector<std::unique_ptr<Env>> envs_;
    std::vector<Vec> teacher_h_, student_h_;
    std::vector<unsigned char> fresh_;
    std::vector<int> rows_;
    nn::Adam adam_;
};

struct ActionGapStats {
    double max_gap = 0.0;  // empirical eta-hat
    double p95 = 0.0;
    double mean = 0.0;
    long samples = 0;
};

// Runs the student (deterministic) in held-out envs while the teacher labels
// the visited states; reports ||a1 - a2|| statistics.
ActionGapStats evaluate_distillation(
    const std::function<Vec(const policy::PolicyObs&, Vec&)>& teacher_act, int teacher_hidden,
    const std::function<Vec(const policy::PolicyObs&, Vec&)>& student_act, int student_hidden,
    const EnvConfig& env_cfg, const terrain::TerrainGrid& grid, int episodes, std::uint64_t seed);

void write_distill_header(std::ostream& os);
void write_distill_row(std::ostream& os, int iter, const IterStats& s);

}  // namespace visloco::phase2

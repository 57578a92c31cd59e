#pragma once

#include "visloco/env.hpp"
#include "visloco/policy.hpp"
#include "visloco/terrain.hpp"

#include <iosfwd>
#include <memory>
#include <vector>

namespace visloco::phase1 {

struct PpoConfig {
    double gamma = 0.99;
    double lam = 0.95;
    double clip = 0.2;
    int epochs = 4;
    int minibatches = 4;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double lr = 1e-3;
    double kl_limit = 0.03;
    double max_grad_norm = 1.0;
    int seg_len = 24;
    // The value head is trained on returns scaled by (1 - gamma) so targets
    // stay O(1); GAE sees the rescaled prediction.
    bool normalize_value_targets = true;

    double value_scale() const { return normalize_value_targets ? 1.0 / (1.0 - gamma) : 1.0; }
};

struct TrainerConfig {
    int num_envs = 16;
    int steps_per_env = 96;  // must be a multiple of seg_len
    PpoConfig ppo;
    int threads = 1;
    std::uint64_t seed = 0;
    bool curriculum = true;
};

// Stored rollouts in truncated-BPTT segments with hidden snapshots at
// segment starts only.
struct RolloutBuffer {
    int num_envs = 0;
    int steps = 0;
    int seg_len = 24;
    // [env][t]
    std::vector<std::vector<policy::PolicyObs>> obs;
    std::vector<std::vector<Vec>> action;
    std::vector<std::vector<double>> log_prob;
    std::vector<std::vector<double>> value;
    std::vector<std::vector<double>> reward;
    std::vector<std::vector<unsigned char>> done;
    std::vector<std::vector<unsigned char>> reset_before;
    std::vector<std::vector<double>> bootstrap;  // valid where done
    std::vector<std::vector<Vec>> seg_hidden;    // [env][segment]
    std::vector<double> tail_bootstrap;          // [env]
    std::vector<std::vector<double>> adv;
    std::vector<std::vector<double>> ret;

    void allocate(int envs, int steps_per_env, int seg);
    int segments_per_env() const { return steps / seg_len; }
    long transition_count() const { return static_cast<long>(num_envs) * steps; }
};

// Generalized advantage estimation with bootstrap at episode time-outs and
// rollout ends; advantages are normalized over the whole batch.
void gae_advantages(RolloutBuffer& buf, double gamma, double lam, bool normalize = true);

struct IterStats {
    long env_steps = 0;
    int episodes = 0;
    double mean_step_reward = 0.0;
    double episode_return = 0.0;
    double episode_length = 0.0;
    double episode_distance = 0.0;
    double mean_col = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    int epochs_run = 0;
    bool update_skipped = false;
};

// Saturating terrain-curriculum column update.
int curriculum_update(int col, int cols, double distance, double terrain_length,
                      double commanded_distance);

class Trainer {
public:
    Trainer(policy::Phase1Policy& policy, const EnvConfig& env_cfg,
            const terrain::TerrainGrid& grid, const TrainerConfig& cfg);

    IterStats iterate();
    long total_env_steps() const { return total_env_steps_; }
    const RolloutBuffer& buffer() const { return buf_; }
    Env& env(int i) { return *envs_[static_cast<std::size_t>(i)]; }
    int num_envs() const { return static_cast<int>(envs_.size()); }
    int env_col(int i) const { return cols_[static_cast<std::size_t>(i)]; }

    static void write_metrics_header(std::ostream& os);
    static void write_metrics_row(std::ostream& os, int iter, const IterStats& s);

private:
    void collect_env(int e, IterStats& stats);
    void update(IterStats& stats);

    policy::Phase1Policy& policy_;
    terrain::TerrainGrid grid_;  // owned copy: cells must outlive the envs
    TrainerConfig cfg_;
    std::vector<std::unique_ptr<Env>> envs_;
    std::vector<Rng> env_rngs_;
    std::vector<Vec> hidden_;
    std::vector<unsigned char> fresh_;
    std::vector<int> rows_, cols_;
    RolloutBuffer buf_;
    nn::Adam adam_;
    Rng update_rng_;
    long total_env_steps_ = 0;
};

}  // namespace visloco::phase1

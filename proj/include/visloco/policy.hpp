#pragma once

#include "visloco/nn.hpp"

#include <memory>
#include <string>
#include <vector>

namespace visloco::policy {

struct PolicyDims {
    int proprio = 14;
    int terrain = 16;  // scandots, processed depth, or elevation
    int priv = 4;
    int gamma_dim = 32;
    int z_dim = 8;
    int gru_hidden = 128;     // monolithic recurrent core
    int enc_hidden = 64;      // encoder MLPs, two hidden layers
    int base_hidden = 64;     // rma base MLP, two hidden layers
    int est_gru_hidden = 64;  // scandot / vision / proprioception GRUs
    int action = 4;
    double init_log_std = -1.2039728043259361;  // ln(0.3)

    int core_input() const { return proprio + gamma_dim + 1; }
    int base_input() const { return proprio + gamma_dim + z_dim + 1; }
};

struct PolicyObs {
    Vec x;        // normalized proprioception
    Vec terrain;  // normalized terrain channel
    Vec priv;     // normalized privileged vector (may be empty)
    double cmd = 0.0;
};

struct ActOut {
    Vec mean;
    Vec action;
    double log_prob = 0.0;
    double value = 0.0;
};

// Diagonal Gaussian with a learned state-independent log std.
double gaussian_log_prob(const Vec& mean, const Vec& log_std, const Vec& action);
double gaussian_entropy(const Vec& log_std);

// Common surface for the two phase-1 architectures. The recurrent state is a
// single flat vector owned by the caller.
class Phase1Policy {
public:
    virtual ~Phase1Policy() = default;
    virtual const std::string& architecture() const = 0;
    virtual int hidden_dim() const = 0;
    virtual int action_dim() const = 0;

    // Runtime path; advances `h`. With rng == nullptr the mean action is
    // returned and log_prob refers to the mean.
    virtual ActOut act(const PolicyObs& o, Vec& h, Rng* rng) = 0;

    // Training path over one truncated-BPTT segment. The initial hidden is
    // detached; `reset_before` zeroes the carried hidden at episode starts
    // so no gradient crosses a done flag.
    virtual void begin_segment(const Vec& h0, int len) = 0;
    virtual void forward_step(int t, const PolicyObs& o, bool reset_before, Vec& mean,
                              double& value) = 0;
    virtual void backward_segment(const std::vector<Vec>& dmean,
                                  const std::vector<double>& dvalue) = 0;

    virtual std::vector<nn::ParamView> params() = 0;

    Vec log_std;
    Vec glog_std;

protected:
    void init_head(const PolicyDims& dims) {
        log_std = Vec::Constant(dims.action, dims.init_log_std);
        glog_std = Vec::Zero(dims.action);
    }
    ActOut sample(const Vec& mean, double value, Rng* rng) const;
};

// Scandot-encoder MLP feeding a stateful GRU with action and value heads.
class MonolithicPolicy final : public Phase1Policy {
public:
    MonolithicPolicy(const PolicyDims& dims, Rng& rng);

    const std::string& architecture() const override;
    int hidden_dim() const override { return dims_.gru_hidden; }
    int action_dim() const override { return dims_.action; }
    ActOut act(const PolicyObs& o, Vec& h, Rng* rng) override;
    void begin_segment(const Vec& h0, int len) override;
    void forward_step(int t, const PolicyObs& o, bool reset_before, Vec& mean,
                      double& value) override;
    void backward_segment(const std::vector<Vec>& dmean,
                          const std::vector<double>& dvalue) override;
    std::vector<nn::ParamView> params() override;

    const PolicyDims& dims() const { return dims_; }
    nn::Mlp& encoder() { return enc_; }
    nn::Gru& core() { return core_; }
    nn::Linear& action_head() { return act_head_; }
    nn::Linear& value_head() { return val_head_; }
    const nn::Mlp& encoder() const { return enc_; }
    const nn::Gru& core() const { return core_; }
    const nn::Linear& action_head() const { return act_head_; }

private:
    struct StepCache {
        nn::MlpCache enc;
        nn::GruCache gru;
        Vec h_out;
        bool reset_before = false;
    };
    Vec assemble_input(const PolicyObs& o, nn::MlpCache* enc_cache);

    PolicyDims dims_;
    nn::Mlp enc_;
    nn::Gru core_;
    nn::Linear act_head_;
    nn::Linear val_head_;
    std::vector<StepCache> seg_;
    Vec h_run_;
};

// Memoryless base MLP fed by a scandot GRU latent and a privileged-MLP
// extrinsics latent. Identical inputs give identical actions.
class RmaPolicy final : public Phase1Policy {
public:
    RmaPolicy(const PolicyDims& dims, Rng& rng);

    const std::string& architecture() const override;
    int hidden_dim() const override { return dims_.est_gru_hidden; }
    int action_dim() const override { return dims_.action; }
    ActOut act(const PolicyObs& o, Vec& h, Rng* rng) override;
    void begin_segment(const Vec& h0, int len) override;
    void forward_step(int t, const PolicyObs& o, bool reset_before, Vec& mean,
                      double& value) override;
    void backward_segment(const std::vector<Vec>& dmean,
                          const std::vector<double>& dvalue) override;
    std::vector<nn::ParamView> params() override;

    const PolicyDims& dims() const { return dims_; }
    // Latents for distillation targets.
    Vec terrain_latent(const PolicyObs& o, Vec& h) const;  // advances h
    Vec extrinsics_latent(const PolicyObs& o) const;
    const nn::Mlp& base() const { return base_; }
    nn::Mlp& base() { return base_; }
    nn::Mlp& value_net() { return value_; }

private:
    struct StepCache {
        nn::GruCache scan;
        nn::MlpCache priv;
        nn::MlpCache base;
        nn::MlpCache value;
        Vec h_out;
        Vec base_in;
        bool reset_before = false;
    };

    PolicyDims dims_;
    nn::Gru scan_gru_;
    nn::Linear scan_head_;
    nn::Mlp priv_enc_;
    nn::Mlp base_;
    nn::Mlp value_;
    std::vector<StepCache> seg_;
    Vec h_run_;
};

std::unique_ptr<Phase1Policy> make_phase1_policy(const std::string& arch, const PolicyDims& dims,
                                                 Rng& rng);

// Phase-2 monolithic student: fresh depth encoder, recurrent core and action
// head initialized as copies of the teacher's.
class MonolithicStudent {
public:
    MonolithicStudent(const PolicyDims& dims, const MonolithicPolicy& teacher, Rng& rng);

    int hidden_dim() const { return dims_.gru_hidden; }
    Vec act(const PolicyObs& o, Vec& h) const;

    void begin_segment(const Vec& h0, int len);
    Vec forward_step(int t, const PolicyObs& o, bool reset_before);  // returns action
    void backward_segment(const std::vector<Vec>& dmean);
    std::vector<nn::ParamView> params();
    std::vector<nn::ParamView> checkpoint_params() { return params(); }
    Vec segment_hidden() const { return h_run_; }  // carried detached across iterations

    const PolicyDims& dims() const { return dims_; }
    nn::Mlp& depth_encoder() { return enc_; }
    const nn::Gru& core() const { return core_; }
    const nn::Linear& action_head() const { return act_head_; }

private:
    struct StepCache {
        nn::MlpCache enc;
        nn::GruCache gru;
        Vec h_out;
        bool reset_before = false;
    };
    PolicyDims dims_;
    nn::Mlp enc_;
    nn::Gru core_;
    nn::Linear act_head_;
    std::vector<StepCache> seg_;
    Vec h_run_;
};

// Phase-2 RMA student: latent estimators trained against the teacher's
// latents; the base MLP is the teacher's and never changes.
class RmaStudent {
public:
    RmaStudent(const PolicyDims& dims, const RmaPolicy& teacher, Rng& rng);

    // hidden = [vision GRU | proprioception GRU]
    int hidden_dim() const { return 2 * dims_.est_gru_hidden; }
    Vec act(const PolicyObs& o, Vec& h) const;

    void begin_segment(const Vec& h0, int len);
    // returns (action, gamma_hat, z_hat)
    struct StepOut {
        Vec action;
        Vec gamma_hat;
        Vec z_hat;
    };
    StepOut forward_step(int t, const PolicyObs& o, bool reset_before);
    void backward_segment(const std::vector<Vec>& dgamma, const std::vector<Vec>& dz);
    std::vector<nn::ParamView> params();  // estimators only; the base is frozen
    std::vector<nn::ParamView> checkpoint_params();  // params plus the frozen base
    Vec segment_hidden() const;

    const PolicyDims& dims() const { return dims_; }
    const nn::Mlp& frozen_base() const { return base_; }
    std::uint64_t base_hash() const;

private:
    struct StepCache {
        nn::MlpCache enc;
        nn::GruCache vis;
        nn::GruCache prop;
        Vec vis_h, prop_h;
        bool reset_before = false;
    };
    Vec vision_input(const PolicyObs& o, const Vec& dtilde) const;
    Vec prop_input(const PolicyObs& o) const;

    PolicyDims dims_;
    nn::Mlp enc_;          // depth -> d~
    nn::Gru vision_gru_;   // (x, cmd, d~) -> hidden
    nn::Linear vision_head_;
    nn::Gru prop_gru_;     // (x, cmd) -> hidden
    nn::Linear prop_head_;
    nn::Mlp base_;         // frozen copy
    std::vector<StepCache> seg_;
    Vec vis_run_, prop_run_;
};

}  // namespace visloco::policy

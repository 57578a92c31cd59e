#include "visloco/policy.hpp"

#include <cmath>

namespace visloco::policy {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

double gaussian_log_prob(const Vec& mean, const Vec& log_std, const Vec& action) {
    double lp = 0.0;
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
        const double sigma = std::exp(log_std[j]);
        const double z = (action[j] - mean[j]) / sigma;
        lp += -0.5 * z * z - log_std[j] - 0.5 * kLog2Pi;
    }
    return lp;
}

double gaussian_entropy(const Vec& log_std) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < log_std.size(); ++j) {
        h += log_std[j] + 0.5 * (kLog2Pi + 1.0);
    }
    return h;
}

ActOut Phase1Policy::sample(const Vec& mean, double value, Rng* rng) const {
    ActOut out;
    out.mean = mean;
    out.value = value;
    if (rng) {
        out.action = mean;
        for (Eigen::Index j = 0; j < mean.size(); ++j) {
            out.action[j] += std::exp(log_std[j]) * rng->normal();
        }
    } else {
        out.action = mean;
    }
    out.log_prob = gaussian_log_prob(mean, log_std, out.action);
    return out;
}

// ---------------------------------------------------------------------------
// Monolithic

MonolithicPolicy::MonolithicPolicy(const PolicyDims& dims, Rng& rng)
    : dims_(dims),
      enc_({dims.terrain, dims.enc_hidden, dims.enc_hidden, dims.gamma_dim}),
      core_(dims.gru_hidden, dims.core_input()),
      act_head_(dims.action, dims.gru_hidden),
      val_head_(1, dims.gru_hidden) {
    enc_.init(rng);
    core_.init(rng);
    act_head_.init(rng);
    val_head_.init(rng);
    init_head(dims);
}

const std::string& MonolithicPolicy::architecture() const {
    static const std::string name = "monolithic";
    return name;
}

Vec MonolithicPolicy::assemble_input(const PolicyObs& o, nn::MlpCache* enc_cache) {
    const Vec gamma = enc_cache ? enc_.forward(o.terrain, *enc_cache) : enc_.forward(o.terrain);
    Vec in(dims_.core_input());
    in.head(dims_.proprio) = o.x;
    in.segment(dims_.proprio, dims_.gamma_dim) = gamma;
    in[dims_.proprio + dims_.gamma_dim] = o.cmd;
    return in;
}

ActOut MonolithicPolicy::act(const PolicyObs& o, Vec& h, Rng* rng) {
    const Vec in = assemble_input(o, nullptr);
    h = core_.step(h, in);
    return sample(act_head_.forward(h), val_head_.forward(h)[0], rng);
}

void MonolithicPolicy::begin_segment(const Vec& h0, int len) {
    seg_.assign(static_cast<std::size_t>(len), StepCache());
    h_run_ = h0;
}

void MonolithicPolicy::forward_step(int t, const PolicyObs& o, bool reset_before, Vec& mean,
                                    double& value) {
    auto& c = seg_.at(static_cast<std::size_t>(t));
    c.reset_before = reset_before;
    if (reset_before) h_run_.setZero();
    const Vec in = assemble_input(o, &c.enc);
    h_run_ = core_.step(h_run_, in, c.gru);
    c.h_out = h_run_;
    mean = act_head_.forward(h_run_);
    value = val_head_.forward(h_run_)[0];
}

void MonolithicPolicy::backward_segment(const std::vector<Vec>& dmean,
                                        const std::vector<double>& dvalue) {
    const int len = static_cast<int>(seg_.size());
    Vec carry = Vec::Zero(dims_.gru_hidden);
    for (int t = len - 1; t >= 0; --t) {
        auto& c = seg_[static_cast<std::size_t>(t)];
        Vec dh = act_head_.backward(c.h_out, dmean[static_cast<std::size_t>(t)]);
        dh += val_head_.backward(c.h_out, Vec::Constant(1, dvalue[static_cast<std::size_t>(t)]));
        dh += carry;
        auto [dh_prev, dx] = core_.backward_step(c.gru, dh);
        carry = std::move(dh_prev);
        if (c.reset_before) carry.setZero();
        const Vec dgamma = dx.segment(dims_.proprio, dims_.gamma_dim);
        (void)enc_.backward(c.enc, dgamma);
    }
}

std::vector<nn::ParamView> MonolithicPolicy::params() {
    std::vector<nn::ParamView> v;
    enc_.collect(v, "enc");
    core_.collect(v, "core");
    act_head_.collect(v, "act_head");
    val_head_.collect(v, "val_head");
    v.push_back({"log_std", log_std.data(), glog_std.data(), log_std.size(), {log_std.size()}});
    return v;
}

// ---------------------------------------------------------------------------
// RMA

RmaPolicy::RmaPolicy(const PolicyDims& dims, Rng& rng)
    : dims_(dims),
      scan_gru_(dims.est_gru_hidden, dims.terrain),
      scan_head_(dims.gamma_dim, dims.est_gru_hidden),
      priv_enc_({dims.priv, dims.enc_hidden, dims.enc_hidden, dims.z_dim}),
      base_({dims.base_input(), dims.base_hidden, dims.base_hidden, dims.action}),
      value_({dims.base_input(), dims.base_hidden, dims.base_hidden, 1}) {
    scan_gru_.init(rng);
    scan_head_.init(rng);
    priv_enc_.init(rng);
    base_.init(rng);
    value_.init(rng);
    init_head(dims);
}

const std::string& RmaPolicy::architecture() const {
    static const std::string name = "rma";
    return name;
}

ActOut RmaPolicy::act(const PolicyObs& o, Vec& h, Rng* rng) {
    h = scan_gru_.step(h, o.terrain);
    const Vec gamma = scan_head_.forward(h);
    const Vec z = priv_enc_.forward(o.priv);
    Vec in(dims_.base_input());
    in.head(dims_.proprio) = o.x;
    in.segment(dims_.proprio, dims_.gamma_dim) = gamma;
    in.segment(dims_.proprio + dims_.gamma_dim, dims_.z_dim) = z;
    in[dims_.base_input() - 1] = o.cmd;
    return sample(base_.forward(in), value_.forward(in)[0], rng);
}

Vec RmaPolicy::terrain_latent(const PolicyObs& o, Vec& h) const {
    h = scan_gru_.step(h, o.terrain);
    return scan_head_.forward(h);
}

Vec RmaPolicy::extrinsics_latent(const PolicyObs& o) const { return priv_enc_.forward(o.priv); }

void RmaPolicy::begin_segment(const Vec& h0, int len) {
    seg_.assign(static_cast<std::size_t>(len), StepCache());
    h_run_ = h0;
}

void RmaPolicy::forward_step(int t, const PolicyObs& o, bool reset_before, Vec& mean,
                             double& value) {
    auto& c = seg_.at(static_cast<std::size_t>(t));
    c.reset_before = reset_before;
    if (reset_before) h_run_.setZero();
    h_run_ = scan_gru_.step(h_run_, o.terrain, c.scan);
    c.h_out = h_run_;
    const Vec gamma = scan_head_.forward(h_run_);
    const Vec z = priv_enc_.forward(o.priv, c.priv);
    c.base_in.resize(dims_.base_input());
    c.base_in.head(dims_.proprio) = o.x;
    c.base_in.segment(dims_.proprio, dims_.gamma_dim) = gamma;
    c.base_in.segment(dims_.proprio + dims_.gamma_dim, dims_.z_dim) = z;
    c.base_in[dims_.base_input() - 1] = o.cmd;
    mean = base_.forward(c.base_in, c.base);
    value = value_.forward(c.base_in, c.value)[0];
}

void RmaPolicy::backward_segment(const std::vector<Vec>& dmean,
                                 const std::vector<double>& dvalue) {
    const int len = static_cast<int>(seg_.size());
    Vec carry = Vec::Zero(dims_.est_gru_hidden);
    for (int t = len - 1; t >= 0; --t) {
        auto& c = seg_[static_cast<std::size_t>(t)];
        Vec din = base_.backward(c.base, dmean[static_cast<std::size_t>(t)]);
        din += value_.backward(c.value, Vec::Constant(1, dvalue[static_cast<std::size_t>(t)]));
        const Vec dgamma = din.segment(dims_.proprio, dims_.gamma_dim);
        const Vec dz = din.segment(dims_.proprio + dims_.gamma_dim, dims_.z_dim);
        (void)priv_enc_.backward(c.priv, dz);
        Vec dh = scan_head_.backward(c.h_out, dgamma);
        dh += carry;
        auto [dh_prev, dterrain] = scan_gru_.backward_step(c.scan, dh);
        (void)dterrain;
        carry = std::move(dh_prev);
        if (c.reset_before) carry.setZero();
    }
}

std::vector<nn::ParamView> RmaPolicy::params() {
    std::vector<nn::ParamView> v;
    scan_gru_.collect(v, "scan_gru");
    scan_head_.collect(v, "scan_head");
    priv_enc_.collect(v, "priv_enc");
    base_.collect(v, "base");
    value_.collect(v, "value");
    v.push_back({"log_std", log_std.data(), glog_std.data(), log_std.size(), {log_std.size()}});
    return v;
}

std::unique_ptr<Phase1Policy> make_phase1_policy(const std::string& arch, const PolicyDims& dims,
                                                 Rng& rng) {
    if (arch == "monolithic") return std::make_unique<MonolithicPolicy>(dims, rng);
    if (arch == "rma") return std::make_unique<RmaPolicy>(dims, rng);
    throw std::invalid_argument("unknown architecture: " + arch);
}

// ---------------------------------------------------------------------------
// Monolithic student

MonolithicStudent::MonolithicStudent(const PolicyDims& dims, const MonolithicPolicy& teacher,
                                     Rng& rng)
    : dims_(dims),
      enc_({dims.terrain, dims.enc_hidden, dims.enc_hidden, dims.gamma_dim}),
      core_(teacher.core()),
      act_head_(teacher.action_head()) {
    enc_.init(rng);
}

Vec MonolithicStudent::act(const PolicyObs& o, Vec& h) const {
    const Vec dtilde = enc_.forward(o.terrain);
    Vec in(dims_.core_input());
    in.head(dims_.proprio) = o.x;
    in.segment(dims_.proprio, dims_.gamma_dim) = dtilde;
    in[dims_.proprio + dims_.gamma_dim] = o.cmd;
    h = core_.step(h, in);
    return act_head_.forward(h);
}

void MonolithicStudent::begin_segment(const Vec& h0, int len) {
    seg_.assign(static_cast<std::size_t>(len), StepCache());
    h_run_ = h0;
}

Vec MonolithicStudent::forward_step(int t, const PolicyObs& o, bool reset_before) {
    auto& c = seg_.at(static_cast<std::size_t>(t));
    c.reset_before = reset_before;
    if (reset_before) h_run_.setZero();
    const Vec dtilde = enc_.forward(o.terrain, c.enc);
    Vec in(dims_.core_input());
    in.head(dims_.proprio) = o.x;
    in.segment(dims_.proprio, dims_.gamma_dim) = dtilde;
    in[dims_.proprio + dims_.gamma_dim] = o.cmd;
    h_run_ = core_.step(h_run_, in, c.gru);
    c.h_out = h_run_;
    return act_head_.forward(h_run_);
}

void MonolithicStudent::backward_segment(const std::vector<Vec>& dmean) {
    const int len = static_cast<int>(seg_.size());
    Vec carry = Vec::Zero(dims_.gru_hidden);
    for (int t = len - 1; t >= 0; --t) {
        auto& c = seg_[static_cast<std::size_t>(t)];
        Vec dh = act_head_.backward(c.h_out, dmean[static_cast<std::size_t>(t)]);
        dh += carry;
        auto [dh_prev, dx] = core_.backward_step(c.gru, dh);
        carry = std::move(dh_prev);
        if (c.reset_before) carry.setZero();
        (void)enc_.backward(c.enc, dx.segment(dims_.proprio, dims_.gamma_dim));
    }
}

std::vector<nn::ParamView> MonolithicStudent::params() {
    std::vector<nn::ParamView> v;
    enc_.collect(v, "depth_enc");
    core_.collect(v, "core");
    act_head_.collect(v, "act_head");
    return v;
}

// ---------------------------------------------------------------------------
// RMA student

RmaStudent::RmaStudent(const PolicyDims& dims, const RmaPolicy& teacher, Rng& rng)
    : dims_(dims),
      enc_({dims.terrain, dims.enc_hidden, dims.enc_hidden, dims.gamma_dim}),
      vision_gru_(dims.est_gru_hidden, dims.proprio + 1 + dims.gamma_dim),
      vision_head_(dims.gamma_dim, dims.est_gru_hidden),
      prop_gru_(dims.est_gru_hidden, dims.proprio + 1),
      prop_head_(dims.z_dim, dims.est_gru_hidden),
      base_(teacher.base()) {
    enc_.init(rng);
    vision_gru_.init(rng);
    vision_head_.init(rng);
    prop_gru_.init(rng);
    prop_head_.init(rng);
}

Vec RmaStudent::vision_input(const PolicyObs& o, const Vec& dtilde) const {
    Vec in(dims_.proprio + 1 + dims_.gamma_dim);
    in.head(dims_.proprio) = o.x;
    in[dims_.proprio] = o.cmd;
    in.tail(dims_.gamma_dim) = dtilde;
    return in;
}

Vec RmaStudent::prop_input(const PolicyObs& o) const {
    Vec in(dims_.proprio + 1);
    in.head(dims_.proprio) = o.x;
    in[dims_.proprio] = o.cmd;
    return in;
}

Vec RmaStudent::act(const PolicyObs& o, Vec& h) const {
    Vec vis_h = h.head(dims_.est_gru_hidden);
    Vec prop_h = h.tail(dims_.est_gru_hidden);
    const Vec dtilde = enc_.forward(o.terrain);
    vis_h = vision_gru_.step(vis_h, vision_input(o, dtilde));
    prop_h = prop_gru_.step(prop_h, prop_input(o));
    const Vec gamma_hat = vision_head_.forward(vis_h);
    const Vec z_hat = prop_head_.forward(prop_h);
    h.head(dims_.est_gru_hidden) = vis_h;
    h.tail(dims_.est_gru_hidden) = prop_h;
    Vec in(dims_.base_input());
    in.head(dims_.proprio) = o.x;
    in.segment(dims_.proprio, dims_.gamma_dim) = gamma_hat;
    in.segment(dims_.proprio + dims_.gamma_dim, dims_.z_dim) = z_hat;
    in[dims_.base_input() - 1] = o.cmd;
    return base_.forward(in);
}

void RmaStudent::begin_segment(const Vec& h0, int len) {
    seg_.assign(static_cast<std::size_t>(len), StepCache());
    vis_run_ = h0.head(dims_.est_gru_hidden);
    prop_run_ = h0.tail(dims_.est_gru_hidden);
}

RmaStudent::StepOut RmaStudent::forward_step(int t, const PolicyObs& o, bool reset_before) {
    auto& c = seg_.at(static_cast<std::size_t>(t));
    c.reset_before = reset_before;
    if (reset_before) {
        vis_run_.setZero();
        prop_run_.setZero();
    }
    const Vec dtilde = enc_.forward(o.terrain, c.enc);
    vis_run_ = vision_gru_.step(vis_run_, vision_input(o, dtilde), c.vis);
    prop_run_ = prop_gru_.step(prop_run_, prop_input(o), c.prop);
    c.vis_h = vis_run_;
    c.prop_h = prop_run_;
    StepOut out;
    out.gamma_hat = vision_head_.forward(vis_run_);
    out.z_hat = prop_head_.forward(prop_run_);
    Vec in(dims_.base_input());
    in.head(dims_.proprio) = o.x;
    in.segment(dims_.proprio, dims_.gamma_dim) = out.gamma_hat;
    in.segment(dims_.proprio + dims_.gamma_dim, dims_.z_dim) = out.z_hat;
    in[dims_.base_input() - 1] = o.cmd;
    out.action = base_.forward(in);
    return out;
}

void RmaStudent::backward_segment(const std::vector<Vec>& dgamma, const std::vector<Vec>& dz) {
    const int len = static_cast<int>(seg_.size());
    Vec vis_carry = Vec::Zero(dims_.est_gru_hidden);
    Vec prop_carry = Vec::Zero(dims_.est_gru_hidden);
    for (int t = len - 1; t >= 0; --t) {
        auto& c = seg_[static_cast<std::size_t>(t)];
        Vec dvh = vision_head_.backward(c.vis_h, dgamma[static_cast<std::size_t>(t)]);
        dvh += vis_carry;
        auto [dvis_prev, dvin] = vision_gru_.backward_step(c.vis, dvh);
        vis_carry = std::move(dvis_prev);
        (void)enc_.backward(c.enc, dvin.tail(dims_.gamma_dim));

        Vec dph = prop_head_.backward(c.prop_h, dz[static_cast<std::size_t>(t)]);
        dph += prop_carry;
        auto [dprop_prev, dpin] = prop_gru_.backward_step(c.prop, dph);
        (void)dpin;
        prop_carry = std::move(dprop_prev);

        if (c.reset_before) {
            vis_carry.setZero();
            prop_carry.setZero();
        }
    }
}

Vec RmaStudent::segment_hidden() const {
    Vec h(2 * dims_.est_gru_hidden);
    h.head(dims_.est_gru_hidden) = vis_run_;
    h.tail(dims_.est_gru_hidden) = prop_run_;
    return h;
}

std::vector<nn::ParamView> RmaStudent::params() {
    std::vector<nn::ParamView> v;
    enc_.collect(v, "depth_enc");
    vision_gru_.collect(v, "vision_gru");
    vision_head_.collect(v, "vision_head");
    prop_gru_.collect(v, "prop_gru");
    prop_head_.collect(v, "prop_head");
    return v;
}

std::vector<nn::ParamView> RmaStudent::checkpoint_params() {
    auto v = params();
    base_.collect(v, "base");
    return v;
}

std::uint64_t RmaStudent::base_hash() const {
    std::vector<nn::ParamView> v;
    const_cast<nn::Mlp&>(base_).collect(v, "base");
    return nn::param_hash(v);
}

}  // namespace visloco::policy

#pragma once

#include "visloco/common.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace visloco::nn {

// A view into one parameter array and its gradient accumulator. Collections
// of views define the canonical flat parameter order used by the optimizer,
// checkpoints and finite-difference checks.
struct ParamView {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    Eigen::Index size = 0;
    std::vector<Eigen::Index> shape;
};

Eigen::Index total_size(const std::vector<ParamView>& views);
Vec flatten_values(const std::vector<ParamView>& views);
Vec flatten_grads(const std::vector<ParamView>& views);
void scatter_values(const std::vector<ParamView>& views, const Vec& flat);
void zero_grads(const std::vector<ParamView>& views);
std::uint64_t param_hash(const std::vector<ParamView>& views);

struct Linear {
    Mat W;
    Vec b;
    Mat gW;
    Vec gb;

    Linear() = default;
    Linear(int out, int in);

    void init(Rng& rng);  // uniform, scaled by fan-in
    int in_dim() const { return static_cast<int>(W.cols()); }
    int out_dim() const { return static_cast<int>(W.rows()); }

    Vec forward(const Vec& x) const;
    // Accumulates gW, gb; returns gradient wrt x.
    Vec backward(const Vec& x, const Vec& dy);

    void collect(std::vector<ParamView>& out, const std::string& prefix);
};

struct MlpCache {
    std::vector<Vec> inputs;  // input to layer k
    std::vector<Vec> pre;     // pre-activation of layer k
};

// Dense network, rectifier on hidden layers, identity output.
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;
    explicit Mlp(const std::vector<int>& dims);  // {in, h..., out}

    void init(Rng& rng);
    int in_dim() const { return layers.front().in_dim(); }
    int out_dim() const { return layers.back().out_dim(); }

    Vec forward(const Vec& x) const;
    Vec forward(const Vec& x, MlpCache& cache) const;
    // Accumulates parameter gradients; returns gradient wrt the input.
    Vec backward(const MlpCache& cache, Vec dy);

    void collect(std::vector<ParamView>& out, const std::string& prefix);
};

struct GruCache {
    Vec x, h_prev, z, r, n, hbar;
};

// Single-layer gated recurrent unit:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wn x + r .* (Un h + bn))
//   h' = (1 - z) .* n + z .* h
struct Gru {
    Mat Wz, Wr, Wn;  // hidden x input
    Mat Uz, Ur, Un;  // hidden x hidden
    Vec bz, br, bn;
    Mat gWz, gWr, gWn, gUz, gUr, gUn;
    Vec gbz, gbr, gbn;

    Gru() = default;
    Gru(int hidden, int input);

    void init(Rng& rng);
    int hidden_dim() const { return static_cast<int>(Uz.rows()); }
    int input_dim() const { return static_cast<int>(Wz.cols()); }

    Vec step(const Vec& h, const Vec& x) const;
    Vec step(const Vec& h, const Vec& x, GruCache& cache) const;
    // dh_new: gradient wrt the step output. Accumulates parameter gradients;
    // returns (dh_prev, dx).
    std::pair<Vec, Vec> backward_step(const GruCache& cache, const Vec& dh_new);

    void collect(std::vector<ParamView>& out, const std::string& prefix);
};

// Stored forward pass of a GRU over one truncated-BPTT window. The initial
// hidden is detached: backward never produces a gradient for anything before
// h0.
struct TapeSegment {
    Vec h0;
    std::vector<GruCache> steps;
    int max_len = 24;

    int length() const { return static_cast<int>(steps.size()); }
};

// Runs the GRU over xs starting from detached h0, recording the tape.
// Returns the per-step hidden outputs. Throws if xs exceeds seg.max_len.
std::vector<Vec> gru_rollforward(const Gru& gru, const Vec& h0,
                                 const std::vector<Vec>& xs, TapeSegment& seg);

// Backpropagates per-step output gradients through the tape, accumulating
// parameter gradients. Returns per-step input gradients.
std::vector<Vec> gru_backward(Gru& gru, const TapeSegment& seg,
                              const std::vector<Vec>& dh_outputs);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter-view layout.
class Adam {
public:
    Adam() = default;
    Adam(AdamConfig cfg, Eigen::Index n) { reset(cfg, n); }

    void reset(AdamConfig cfg, Eigen::Index n);
    // Applies one update from the accumulated gradients in `views`.
    void update(const std::vector<ParamView>& views);

    long step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    AdamConfig cfg_;
    long step_count_ = 0;
    Vec m_, v_;
};

// Central finite differences against analytic gradients.
//
// `loss` evaluates the scalar objective at the current parameters;
// `compute_grads` zeroes and refills the gradient accumulators. Returns the
// max over parameters of |fd - analytic| / max(|fd|, |analytic|, floor).
double finite_diff_max_rel_error(const std::vector<ParamView>& views,
                                 const std::function<double()>& loss,
                                 const std::function<void()>& compute_grads,
                                 double eps = 1e-5, double floor = 1e-6);

}  // namespace visloco::nn

#include "visloco/nn.hpp"

#include <cmath>

namespace visloco::nn {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_dim(const char* what, Eigen::Index got, Eigen::Index want) {
    if (got != want) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch, got " +
                                    std::to_string(got) + ", want " + std::to_string(want));
    }
}

}  // namespace

Eigen::Index total_size(const std::vector<ParamView>& views) {
    Eigen::Index n = 0;
    for (const auto& v : views) n += v.size;
    return n;
}

Vec flatten_values(const std::vector<ParamView>& views) {
    Vec out(total_size(views));
    Eigen::Index off = 0;
    for (const auto& v : views) {
        out.segment(off, v.size) = Eigen::Map<const Vec>(v.value, v.size);
        off += v.size;
    }
    return out;
}

Vec flatten_grads(const std::vector<ParamView>& views) {
    Vec out(total_size(views));
    Eigen::Index off = 0;
    for (const auto& v : views) {
        out.segment(off, v.size) = Eigen::Map<const Vec>(v.grad, v.size);
        off += v.size;
    }
    return out;
}

void scatter_values(const std::vector<ParamView>& views, const Vec& flat) {
    check_dim("scatter_values", flat.size(), total_size(views));
    Eigen::Index off = 0;
    for (const auto& v : views) {
        Eigen::Map<Vec>(v.value, v.size) = flat.segment(off, v.size);
        off += v.size;
    }
}

void zero_grads(const std::vector<ParamView>& views) {
    for (const auto& v : views) Eigen::Map<Vec>(v.grad, v.size).setZero();
}

std::uint64_t param_hash(const std::vector<ParamView>& views) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& v : views) {
        h = fnv1a(v.name.data(), v.name.size(), h);
        h = fnv1a(v.value, static_cast<std::size_t>(v.size) * sizeof(double), h);
    }
    return h;
}

Linear::Linear(int out, int in) {
    W = Mat::Zero(out, in);
    b = Vec::Zero(out);
    gW = Mat::Zero(out, in);
    gb = Vec::Zero(out);
}

void Linear::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(W.cols()));
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
}

Vec Linear::forward(const Vec& x) const {
    check_dim("Linear::forward", x.size(), W.cols());
    return W * x + b;
}

Vec Linear::backward(const Vec& x, const Vec& dy) {
    check_dim("Linear::backward", dy.size(), W.rows());
    gW.noalias() += dy * x.transpose();
    gb += dy;
    return W.transpose() * dy;
}

void Linear::collect(std::vector<ParamView>& out, const std::string& prefix) {
    out.push_back({prefix + ".W", W.data(), gW.data(), W.size(), {W.rows(), W.cols()}});
    out.push_back({prefix + ".b", b.data(), gb.data(), b.size(), {b.size()}});
}

Mlp::Mlp(const std::vector<int>& dims) {
    if (dims.size() < 2) throw std::invalid_argument("Mlp: need at least in/out dims");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        layers.emplace_back(dims[i + 1], dims[i]);
    }
}

void Mlp::init(Rng& rng) {
    for (auto& l : layers) l.init(rng);
}

Vec Mlp::forward(const Vec& x) const {
    Vec h = x;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        h = layers[k].forward(h);
        if (k + 1 < layers.size()) h = h.cwiseMax(0.0);
    }
    if (!h.allFinite()) throw std::runtime_error("Mlp::forward: non-finite output");
    return h;
}

Vec Mlp::forward(const Vec& x, MlpCache& cache) const {
    cache.inputs.assign(layers.size(), Vec());
    cache.pre.assign(layers.size(), Vec());
    Vec h = x;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        cache.inputs[k] = h;
        h = layers[k].forward(h);
        cache.pre[k] = h;
        if (k + 1 < layers.size()) h = h.cwiseMax(0.0);
    }
    return h;
}

Vec Mlp::backward(const MlpCache& cache, Vec dy) {
    for (std::size_t k = layers.size(); k-- > 0;) {
        if (k + 1 < layers.size()) {
            // through the rectifier of layer k
            dy = (cache.pre[k].array() > 0.0).select(dy, 0.0);
        }
        dy = layers[k].backward(cache.inputs[k], dy);
    }
    return dy;
}

void Mlp::collect(std::vector<ParamView>& out, const std::string& prefix) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
        layers[k].collect(out, prefix + ".l" + std::to_string(k));
    }
}

Gru::Gru(int hidden, int input) {
    Wz = Mat::Zero(hidden, input);
    Wr = Mat::Zero(hidden, input);
    Wn = Mat::Zero(hidden, input);
    Uz = Mat::Zero(hidden, hidden);
    Ur = Mat::Zero(hidden, hidden);
    Un = Mat::Zero(hidden, hidden);
    bz = Vec::Zero(hidden);
    br = Vec::Zero(hidden);
    bn = Vec::Zero(hidden);
    gWz = Wz; gWr = Wr; gWn = Wn;
    gUz = Uz; gUr = Ur; gUn = Un;
    gbz = bz; gbr = br; gbn = bn;
}

void Gru::init(Rng& rng) {
    auto fill = [&rng](Mat& m, double bound) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
    };
    const double bw = 1.0 / std::sqrt(static_cast<double>(input_dim()));
    const double bu = 1.0 / std::sqrt(static_cast<double>(hidden_dim()));
    fill(Wz, bw); fill(Wr, bw); fill(Wn, bw);
    fill(Uz, bu); fill(Ur, bu); fill(Un, bu);
    for (Eigen::Index i = 0; i < bz.size(); ++i) bz[i] = rng.uniform(-bu, bu);
    for (Eigen::Index i = 0; i < br.size(); ++i) br[i] = rng.uniform(-bu, bu);
    for (Eigen::Index i = 0; i < bn.size(); ++i) bn[i] = rng.uniform(-bu, bu);
}

Vec Gru::step(const Vec& h, const Vec& x) const {
    GruCache scratch;
    return step(h, x, scratch);
}

Vec Gru::step(const Vec& h, const Vec& x, GruCache& cache) const {
    check_dim("Gru::step hidden", h.size(), hidden_dim());
    check_dim("Gru::step input", x.size(), input_dim());
    cache.x = x;
    cache.h_prev = h;
    Vec az = Wz * x + Uz * h + bz;
    Vec ar = Wr * x + Ur * h + br;
    cache.z = az.unaryExpr([](double v) { return sigmoid(v); });
    cache.r = ar.unaryExpr([](double v) { return sigmoid(v); });
    cache.hbar = Un * h + bn;
    Vec an = Wn * x + cache.r.cwiseProduct(cache.hbar);
    cache.n = an.array().tanh();
    return (Vec::Ones(h.size()) - cache.z).cwiseProduct(cache.n) + cache.z.cwiseProduct(h);
}

std::pair<Vec, Vec> Gru::backward_step(const GruCache& c, const Vec& dh_new) {
    const Vec& h = c.h_prev;
    Vec dh_prev = dh_new.cwiseProduct(c.z);
    Vec dz = dh_new.cwiseProduct(h - c.n);
    Vec dn = dh_new.cwiseProduct(Vec::Ones(h.size()) - c.z);

    Vec dan = dn.cwiseProduct(Vec::Ones(h.size()) - c.n.cwiseProduct(c.n));
    gWn.noalias() += dan * c.x.transpose();
    Vec dr = dan.cwiseProduct(c.hbar);
    Vec dhbar = dan.cwiseProduct(c.r);
    gUn.noalias() += dhbar * h.transpose();
    gbn += dhbar;
    dh_prev.noalias() += Un.transpose() * dhbar;

    Vec daz = dz.cwiseProduct(c.z).cwiseProduct(Vec::Ones(h.size()) - c.z);
    gWz.noalias() += daz * c.x.transpose();
    gUz.noalias() += daz * h.transpose();
    gbz += daz;
    dh_prev.noalias() += Uz.transpose() * daz;

    Vec dar = dr.cwiseProduct(c.r).cwiseProduct(Vec::Ones(h.size()) - c.r);
    gWr.noalias() += dar * c.x.transpose();
    gUr.noalias() += dar * h.transpose();
    gbr += dar;
    dh_prev.noalias() += Ur.transpose() * dar;

    Vec dx = Wn.transpose() * dan;
    dx.noalias() += Wz.transpose() * daz;
    dx.noalias() += Wr.transpose() * dar;
    return {std::move(dh_prev), std::move(dx)};
}

void Gru::collect(std::vector<ParamView>& out, const std::string& prefix) {
    auto add = [&out, &prefix](const char* n, Mat& m, Mat& g) {
        out.push_back({prefix + "." + n, m.data(), g.data(), m.size(), {m.rows(), m.cols()}});
    };
    auto addv = [&out, &prefix](const char* n, Vec& v, Vec& g) {
        out.push_back({prefix + "." + n, v.data(), g.data(), v.size(), {v.size()}});
    };
    add("Wz", Wz, gWz); add("Wr", Wr, gWr); add("Wn", Wn, gWn);
    add("Uz", Uz, gUz); add("Ur", Ur, gUr); add("Un", Un, gUn);
    addv("bz", bz, gbz); addv("br", br, gbr); addv("bn", bn, gbn);
}

std::vector<Vec> gru_rollforward(const Gru& gru, const Vec& h0,
                                 const std::vector<Vec>& xs, TapeSegment& seg) {
    if (static_cast<int>(xs.size()) > seg.max_len) {
        throw std::invalid_argument("gru_rollforward: segment longer than truncation window");
    }
    seg.h0 = h0;
    seg.steps.assign(xs.size(), GruCache());
    std::vector<Vec> outputs(xs.size());
    Vec h = h0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        h = gru.step(h, xs[t], seg.steps[t]);
        outputs[t] = h;
    }
    return outputs;
}

std::vector<Vec> gru_backward(Gru& gru, const TapeSegment& seg,
                              const std::vector<Vec>& dh_outputs) {
    if (dh_outputs.size() != seg.steps.size()) {
        throw std::invalid_argument("gru_backward: gradient count mismatch");
    }
    std::vector<Vec> dxs(seg.steps.size());
    Vec carry = Vec::Zero(gru.hidden_dim());
    for (std::size_t t = seg.steps.size(); t-- > 0;) {
        Vec dh = dh_outputs[t] + carry;
        auto [dh_prev, dx] = gru.backward_step(seg.steps[t], dh);
        carry = std::move(dh_prev);
        dxs[t] = std::move(dx);
    }
    // carry now holds d/dh0, which is discarded: the segment boundary is
    // detached.
    return dxs;
}

void Adam::reset(AdamConfig cfg, Eigen::Index n) {
    cfg_ = cfg;
    step_count_ = 0;
    m_ = Vec::Zero(n);
    v_ = Vec::Zero(n);
}

void Adam::update(const std::vector<ParamView>& views) {
    const Eigen::Index n = total_size(views);
    if (m_.size() != n) throw std::invalid_argument("Adam::update: layout mismatch");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    Eigen::Index off = 0;
    for (const auto& view : views) {
        for (Eigen::Index i = 0; i < view.size; ++i) {
            const double g = view.grad[i];
            double& m = m_[off + i];
            double& v = v_[off + i];
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            view.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        off += view.size;
    }
}

double finite_diff_max_rel_error(const std::vector<ParamView>& views,
                                 const std::function<double()>& loss,
                                 const std::function<void()>& compute_grads,
                                 double eps, double floor) {
    if (eps <= 0.0) throw std::invalid_argument("finite_diff_max_rel_error: eps must be > 0");
    compute_grads();
    const Vec analytic = flatten_grads(views);
    Vec theta = flatten_values(views);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + eps;
        scatter_values(views, theta);
        const double up = loss();
        theta[i] = saved - eps;
        scatter_values(views, theta);
        const double down = loss();
        theta[i] = saved;
        const double fd = (up - down) / (2.0 * eps);
        const double denom = std::max({std::abs(fd), std::abs(analytic[i]), floor});
        worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
    }
    scatter_values(views, theta);
    return worst;
}

}  // namespace visloco::nn

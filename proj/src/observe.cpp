#include "visloco/observe.hpp"

#include <cmath>

namespace visloco::obs {

using terrain::Heightfield;
using terrain::height_at;

Vec Proprioception::to_vector() const {
    Vec v(kDim);
    v.segment<4>(0) = q;
    v.segment<4>(4) = qd;
    v[8] = omega;
    v[9] = pitch;
    v.segment<4>(10) = last_action;
    return v;
}

Proprioception Proprioception::from_vector(const Vec& v) {
    if (v.size() != kDim) throw std::invalid_argument("Proprioception: bad vector size");
    Proprioception p;
    p.q = v.segment<4>(0);
    p.qd = v.segment<4>(4);
    p.omega = v[8];
    p.pitch = v[9];
    p.last_action = v.segment<4>(10);
    return p;
}

Proprioception proprio(const sim::WalkerState& state, const sim::Joints& last_action) {
    Proprioception p;
    p.q = state.q;
    p.qd = state.qd;
    p.omega = state.omega;
    p.pitch = state.theta;
    p.last_action = last_action;
    return p;
}

ScanLayout ScanLayout::make_default() {
    ScanLayout layout;
    constexpr int n = 16;
    for (int i = 0; i < n; ++i) {
        layout.offsets.push_back(-0.4 + 1.2 * static_cast<double>(i) / (n - 1));
    }
    return layout;
}

Vec scandots(const sim::WalkerState& state, const Heightfield& hf, const ScanLayout& layout,
             bool* clipped) {
    Vec m(layout.size());
    bool any_oob = false;
    for (int i = 0; i < layout.size(); ++i) {
        bool oob = false;
        m[i] = height_at(hf, state.x + layout.offsets[i], &oob) - state.z;
        any_oob = any_oob || oob;
    }
    if (clipped) *clipped = any_oob;
    return m;
}

Vec raycast_depth(const sim::WalkerState& state, const Heightfield& hf, const DepthCamera& cam,
                  const sim::SimConfig& cfg) {
    const sim::Vec2 origin = sim::camera_position(state, cfg);
    Vec out(cam.rays);
    const double top = state.theta - cam.mount_pitch + 0.5 * cam.fan;
    for (int k = 0; k < cam.rays; ++k) {
        const double angle =
            cam.rays > 1 ? top - cam.fan * static_cast<double>(k) / static_cast<double>(cam.rays - 1)
                         : top - 0.5 * cam.fan;
        const double dx = std::cos(angle), dz = std::sin(angle);
        auto below = [&](double t) {
            return origin.y() + t * dz < height_at(hf, origin.x() + t * dx);
        };
        double hit = kDepthHole;
        if (below(0.0)) {
            hit = 0.0;
        } else {
            double lo = 0.0;
            for (double t = cam.march_step; t <= cam.max_range; t += cam.march_step) {
                if (below(t)) {
                    double hi = t;
                    while (hi - lo > cam.bisect_tol) {
                        const double mid = 0.5 * (lo + hi);
                        (below(mid) ? hi : lo) = mid;
                    }
                    hit = 0.5 * (lo + hi);
                    break;
                }
                lo = t;
            }
        }
        out[k] = hit;
    }
    return out;
}

std::optional<Vec> preprocess_depth(const Vec& raw, const DepthPreprocess& pp) {
    const int n = static_cast<int>(raw.size());
    if (n <= pp.crop_leading) throw std::invalid_argument("preprocess_depth: scan too short");
    const int m = n - pp.crop_leading;
    Vec cropped = raw.tail(m);

    std::vector<int> valid;
    for (int i = 0; i < m; ++i) {
        if (cropped[i] != kDepthHole) valid.push_back(i);
    }
    if (valid.empty()) return std::nullopt;

    Vec filled = cropped;
    for (int i = 0; i < m; ++i) {
        if (cropped[i] != kDepthHole) continue;
        int best = valid.front();
        int best_dist = std::abs(best - i);
        for (int v : valid) {
            const int d = std::abs(v - i);
            if (d < best_dist) {  // ties keep the earlier (nearer-index) donor
                best = v;
                best_dist = d;
            }
        }
        filled[i] = cropped[best];
    }

    // block means over alternating group sizes covering all m rays
    Vec out(pp.output);
    const int base = m / pp.output;
    const int extra = m % pp.output;  // first `extra` groups get one more ray
    int idx = 0;
    for (int g = 0; g < pp.output; ++g) {
        const int size = base + (g < extra ? 1 : 0);
        double acc = 0.0;
        for (int j = 0; j < size; ++j) acc += filled[idx++];
        out[g] = acc / static_cast<double>(size);
    }
    return out;
}

void LatencyModel::reset(double now, Rng& rng) {
    queue_.clear();
    current_.reset();
    current_ts_ = -1.0;
    next_capture_ = now;  // first capture due immediately
    (void)rng;
}

void LatencyModel::advance(double now, Rng& rng, const std::function<Vec(double)>& capture) {
    while (next_capture_ <= now + 1e-12) {
        Pending p;
        p.capture_ts = next_capture_;
        p.deliver_ts = next_capture_ + rng.uniform(cfg_.latency_lo, cfg_.latency_hi);
        p.scan = capture(next_capture_);
        queue_.push_back(std::move(p));
        next_capture_ += rng.uniform(cfg_.interval_lo, cfg_.interval_hi);
    }
    while (!queue_.empty() && queue_.front().deliver_ts <= now + 1e-12) {
        current_ = std::move(queue_.front().scan);
        current_ts_ = queue_.front().capture_ts;
        queue_.pop_front();
    }
}

void DepthPipeline::reset(double now, Rng& rng) {
    latency_.reset(now, rng);
    last_processed_.reset();
    last_raw_.resize(0);
    hole_flag_ = false;
}

void DepthPipeline::advance(const sim::WalkerState& state, const Heightfield& hf,
                            const sim::SimConfig& cfg, Rng& rng) {
    latency_.advance(state.t, rng, [&](double) {
        last_raw_ = raycast_depth(state, hf, cam_, cfg);
        auto processed = preprocess_depth(last_raw_, pp_);
        if (!processed) {
            hole_flag_ = true;
            return last_processed_ ? *last_processed_ : Vec::Constant(pp_.output, cam_.max_range).eval();
        }
        hole_flag_ = false;
        last_processed_ = *processed;
        return *processed;
    });
}

NoiseTable NoiseTable::make_default(const sim::SimConfig& cfg) {
    NoiseTable t;
    t.joint_pos_b.resize(4);
    for (int j = 0; j < 4; ++j) t.joint_pos_b[j] = cfg.q_default[j];
    return t;
}

double apply_entry(const NoiseTableEntry& e, double o, Rng* rng) {
    double out = e.a * (o - e.b);
    if (rng && e.sigma > 0.0) out += rng->normal(0.0, e.sigma);
    return out;
}

Vec apply_entry(const NoiseTableEntry& e, const Vec& o, Rng* rng) {
    Vec out(o.size());
    for (Eigen::Index i = 0; i < o.size(); ++i) out[i] = apply_entry(e, o[i], rng);
    return out;
}

Vec corrupt_values(const Vec& clean, const ElevNoiseSpec& spec, double offset, Rng& rng) {
    Vec out(clean.size());
    for (Eigen::Index i = 0; i < clean.size(); ++i) {
        double v = clean[i] + offset;
        if (spec.outlier_prob > 0.0 && rng.uniform() < spec.outlier_prob) {
            v += rng.uniform(-spec.outlier_range, spec.outlier_range);
        }
        if (spec.jitter_sigma > 0.0) v += rng.normal(0.0, spec.jitter_sigma);
        out[i] = v;
    }
    return out;
}

void ElevationCorruptor::reset(Rng& rng) {
    offset_ = spec_.offset_sigma > 0.0 ? rng.normal(0.0, spec_.offset_sigma) : 0.0;
    drift_ = 0.0;
    delay_.clear();
}

Vec ElevationCorruptor::step(const sim::WalkerState& state, const Heightfield& hf,
                             const ScanLayout& layout, Rng& rng) {
    if (spec_.drift_step > 0.0) {
        drift_ += rng.uniform() < 0.5 ? -spec_.drift_step : spec_.drift_step;
        drift_ = std::clamp(drift_, -spec_.drift_max, spec_.drift_max);
    }
    Vec clean(layout.size());
    for (int i = 0; i < layout.size(); ++i) {
        clean[i] = height_at(hf, state.x + layout.offsets[i] + drift_) - state.z;
    }
    Vec corrupted = corrupt_values(clean, spec_, offset_, rng);
    delay_.push_back(std::move(corrupted));
    if (static_cast<int>(delay_.size()) > spec_.latency_steps + 1) delay_.pop_front();
    return delay_.front();
}

}  // namespace visloco::obs

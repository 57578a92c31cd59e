#pragma once

#include "visloco/common.hpp"
#include "visloco/sim.hpp"
#include "visloco/terrain.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <vector>

namespace visloco::obs {

struct Proprioception {
    sim::Joints q = sim::Joints::Zero();
    sim::Joints qd = sim::Joints::Zero();
    double omega = 0.0;
    double pitch = 0.0;
    sim::Joints last_action = sim::Joints::Zero();

    static constexpr int kDim = 14;
    Vec to_vector() const;
    static Proprioception from_vector(const Vec& v);
};

Proprioception proprio(const sim::WalkerState& state, const sim::Joints& last_action);

// Fixed body-frame x offsets at which terrain height is queried.
struct ScanLayout {
    std::vector<double> offsets;  // meters, body frame

    static ScanLayout make_default();  // 16 points spanning [-0.4, +0.8]
    int size() const { return static_cast<int>(offsets.size()); }
};

// m_t[i] = height_at(hf, x_body + offset_i) - z_body. Out-of-terrain queries
// clamp; `clipped` (when given) reports whether any query left the field.
Vec scandots(const sim::WalkerState& state, const terrain::Heightfield& hf,
             const ScanLayout& layout, bool* clipped = nullptr);

// Head-mounted 1-D depth sensor.
struct DepthCamera {
    int rays = 64;
    double fan = 60.0 * M_PI / 180.0;    // full vertical fan
    double mount_pitch = 30.0 * M_PI / 180.0;  // downward from the body axis
    double max_range = 3.0;
    double march_step = 0.005;
    double bisect_tol = 0.0005;
};

constexpr double kDepthHole = -1.0;

// The fan spans mount_pitch +- fan/2 below the body axis; ray 0 is the
// shallowest (most forward-looking), the last the steepest.
Vec raycast_depth(const sim::WalkerState& state, const terrain::Heightfield& hf,
                  const DepthCamera& cam, const sim::SimConfig& cfg);

struct DepthPreprocess {
    int crop_leading = 8;
    int output = 16;
};

// Crop, nearest-neighbor hole fill (ties to the nearer index), block-mean
// downsample. Returns nothing when every ray is a hole.
std::optional<Vec> preprocess_depth(const Vec& raw, const DepthPreprocess& pp = {});

struct LatencyConfig {
    double interval_lo = 0.080;  // update interval, seconds
    double interval_hi = 0.120;
    double latency_lo = 0.010;   // delivery latency, seconds
    double latency_hi = 0.030;
};

// Asynchronous scan delivery: captures are scheduled at randomized intervals
// and become visible only after their delivery latency has elapsed.
class LatencyModel {
public:
    LatencyModel() = default;
    explicit LatencyModel(const LatencyConfig& cfg) : cfg_(cfg) {}

    void reset(double now, Rng& rng);
    // `capture` is invoked for each capture that falls due by `now`; its
    // result enters the delivery queue.
    void advance(double now, Rng& rng, const std::function<Vec(double)>& capture);
    bool has_scan() const { return current_.has_value(); }
    const Vec& current() const { return *current_; }
    double current_timestamp() const { return current_ts_; }

private:
    LatencyConfig cfg_;
    double next_capture_ = 0.0;
    struct Pending {
        double capture_ts;
        double deliver_ts;
        Vec scan;
    };
    std::deque<Pending> queue_;
    std::optional<Vec> current_;
    double current_ts_ = -1.0;
};

// End-to-end depth sensing for one environment: raycast at randomized capture
// times, preprocess, deliver with latency, reuse the last processed scan when
// a capture is entirely holes.
class DepthPipeline {
public:
    DepthPipeline() = default;
    DepthPipeline(const DepthCamera& cam, const DepthPreprocess& pp, const LatencyConfig& lat)
        : cam_(cam), pp_(pp), latency_(lat) {}

    void reset(double now, Rng& rng);
    void advance(const sim::WalkerState& state, const terrain::Heightfield& hf,
                 const sim::SimConfig& cfg, Rng& rng);
    bool has_scan() const { return latency_.has_scan(); }
    const Vec& processed() const { return latency_.current(); }
    double timestamp() const { return latency_.current_timestamp(); }
    bool hole_flag() const { return hole_flag_; }
    const Vec& last_raw() const { return last_raw_; }

private:
    DepthCamera cam_;
    DepthPreprocess pp_;
    LatencyModel latency_;
    std::optional<Vec> last_processed_;
    Vec last_raw_;
    bool hole_flag_ = false;
};

// o' = a (o - b) + eps, eps ~ N(0, sigma).
struct NoiseTableEntry {
    double a = 1.0;
    double b = 0.0;
    double sigma = 0.0;
};

struct NoiseTable {
    NoiseTableEntry joint_pos{1.0, 0.0, 0.01};   // b per joint via joint_pos_b
    Vec joint_pos_b;                              // defaults to the stand pose
    NoiseTableEntry joint_vel{0.05, 0.0, 0.05};
    NoiseTableEntry ang_vel{0.25, 0.0, 0.05};
    NoiseTableEntry orientation{1.0, 0.0, 0.02};
    NoiseTableEntry scandot{5.0, 0.0, 0.07};
    double scandot_loc_sigma = 0.01;  // horizontal query jitter, meters
    bool enabled = true;

    static NoiseTable make_default(const sim::SimConfig& cfg);
};

double apply_entry(const NoiseTableEntry& e, double o, Rng* rng);
Vec apply_entry(const NoiseTableEntry& e, const Vec& o, Rng* rng);

// Elevation-map corruption for the noisy baseline: per-episode vertical
// offset, slowly drifting horizontal shift, outliers, per-point jitter, and a
// fixed delivery latency.
struct ElevNoiseSpec {
    double offset_sigma = 0.05;   // per-episode vertical offset, meters
    double drift_step = 0.01;     // random-walk step per control step, meters
    double drift_max = 0.10;
    double outlier_prob = 0.02;
    double outlier_range = 0.30;  // uniform +- range, meters
    double jitter_sigma = 0.02;
    int latency_steps = 2;        // 40 ms at 50 Hz
};

// Value-level corruption only (offset + outliers + jitter); the horizontal
// drift applies at sampling time.
Vec corrupt_values(const Vec& clean, const ElevNoiseSpec& spec, double offset, Rng& rng);

class ElevationCorruptor {
public:
    ElevationCorruptor() = default;
    explicit ElevationCorruptor(const ElevNoiseSpec& spec) : spec_(spec) {}

    void reset(Rng& rng);
    // One control step: updates the drift, samples the map at the shifted
    // queries, corrupts values, and returns the latency-delayed vector.
    Vec step(const sim::WalkerState& state, const terrain::Heightfield& hf,
             const ScanLayout& layout, Rng& rng);
    double offset() const { return offset_; }
    double drift() const { return drift_; }

private:
    ElevNoiseSpec spec_;
    double offset_ = 0.0;
    double drift_ = 0.0;
    std::deque<Vec> delay_;
};

}  // namespace visloco::obs

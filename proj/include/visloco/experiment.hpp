#pragma once

#include "visloco/config.hpp"
#include "visloco/eval.hpp"

#include <optional>
#include <string>

namespace visloco::experiment {

struct StageOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    bool force = false;
};

// Stage entry points used by the C API / CLI. Every stage writes through the
// manifest: reruns against the same config hash refuse unless forced.
void train_phase1(const StageOptions& opt);
void distill_phase2(const StageOptions& opt, std::string teacher_checkpoint = "");
void evaluate(const StageOptions& opt, std::string checkpoint = "");
void run_all(const StageOptions& opt);

// A checkpoint turned back into an executable policy.
struct LoadedPolicy {
    std::string architecture;
    int phase = 0;
    std::string baseline = "none";
    int hidden_dim = 0;
    bool student_channels = false;
    eval::ActFn act;
    std::shared_ptr<void> holder;  // owns the underlying networks
};

LoadedPolicy load_policy(const std::string& checkpoint_path, const config::ExperimentConfig& cfg);

std::string manifest_path(const std::string& out_dir);

}  // namespace visloco::experiment

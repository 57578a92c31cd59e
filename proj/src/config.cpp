#include "visloco/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace visloco::config {

using nlohmann::json;

terrain::GridConfig ExperimentConfig::default_grid() {
    terrain::GridConfig g;
    g.kinds = {terrain::TerrainKind::Flat,       terrain::TerrainKind::Slope,
               terrain::TerrainKind::StairsUp,   terrain::TerrainKind::StairsDown,
               terrain::TerrainKind::DiscreteObstacles, terrain::TerrainKind::Gaps};
    g.cols = 10;
    return g;
}

void ExperimentConfig::validate() const {
    if (architecture != "monolithic" && architecture != "rma") {
        throw std::invalid_argument("config: architecture must be monolithic or rma");
    }
    (void)baseline_from_name(baseline);
    if (work_mode != "power" && work_mode != "torque_angle") {
        throw std::invalid_argument("config: work_mode must be power or torque_angle");
    }
    if (grid.kinds.empty() || grid.cols < 1) throw std::invalid_argument("config: bad grid");
    if (grid.kinds.size() > static_cast<std::size_t>(terrain::kNumTerrainKinds)) {
        throw std::invalid_argument("config: more rows than terrain kinds");
    }
    if (phase1.steps_per_env % phase1.ppo.seg_len != 0) {
        throw std::invalid_argument("config: steps_per_env must be a multiple of seg_len");
    }
    if (phase1_env_steps < 0 || phase2_iterations < 0) {
        throw std::invalid_argument("config: negative budget");
    }
    if (eval.episodes_per_terrain < 1 || eval.episode_seconds <= 0.0) {
        throw std::invalid_argument("config: bad eval settings");
    }
    for (int c : eval.columns) {
        if (c < 0 || c >= grid.cols) throw std::invalid_argument("config: eval column out of range");
    }
}

EnvConfig ExperimentConfig::phase1_env() const {
    EnvConfig e = env;
    e.finalize();
    e.baseline = baseline_from_name(baseline);
    e.reward.work_mode =
        work_mode == "power" ? rewards::WorkMode::Power : rewards::WorkMode::TorqueAngle;
    e.enable_depth = false;
    e.enable_elevation = false;
    return e;
}

EnvConfig ExperimentConfig::phase2_env() const {
    EnvConfig e = phase1_env();
    if (e.baseline == Baseline::Noisy) {
        e.enable_elevation = true;
    } else if (e.baseline == Baseline::None) {
        e.enable_depth = true;
    }
    // blind: both channels stay zeroed
    return e;
}

EnvConfig ExperimentConfig::eval_env(bool student_channels) const {
    EnvConfig e = student_channels ? phase2_env() : phase1_env();
    e.episode_seconds = eval.episode_seconds;
    return e;
}

namespace {

void get(const json& j, const char* key, double& out) {
    if (j.contains(key)) out = j.at(key).get<double>();
}
void get(const json& j, const char* key, int& out) {
    if (j.contains(key)) out = j.at(key).get<int>();
}
void get(const json& j, const char* key, long& out) {
    if (j.contains(key)) out = j.at(key).get<long>();
}
void get(const json& j, const char* key, bool& out) {
    if (j.contains(key)) out = j.at(key).get<bool>();
}
void get(const json& j, const char* key, std::string& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
}
void get(const json& j, const char* key, std::uint64_t& out) {
    if (j.contains(key)) out = j.at(key).get<std::uint64_t>();
}

void parse_grid(const json& j, terrain::GridConfig& g) {
    if (j.contains("kinds")) {
        g.kinds.clear();
        for (const auto& name : j.at("kinds")) {
            g.kinds.push_back(terrain::kind_from_name(name.get<std::string>()));
        }
    }
    get(j, "cols", g.cols);
    get(j, "apply_fractal", g.apply_fractal);
    get(j, "flat_fractal", g.flat_fractal);
    get(j, "rough_fractal_lo", g.rough_fractal_lo);
    get(j, "rough_fractal_hi", g.rough_fractal_hi);
    if (j.contains("terrain")) {
        const json& t = j.at("terrain");
        get(t, "length", g.terrain.length);
        get(t, "dx", g.terrain.dx);
        get(t, "gap_count", g.terrain.gap_count);
        get(t, "obstacle_count", g.terrain.obstacle_count);
        get(t, "stair_run", g.terrain.stair_run);
        get(t, "stone_length", g.terrain.stone_length);
    }
}

json grid_to_json(const terrain::GridConfig& g) {
    json j;
    std::vector<std::string> kinds;
    for (auto k : g.kinds) kinds.emplace_back(terrain::kind_name(k));
    j["kinds"] = kinds;
    j["cols"] = g.cols;
    j["apply_fractal"] = g.apply_fractal;
    j["flat_fractal"] = g.flat_fractal;
    j["rough_fractal_lo"] = g.rough_fractal_lo;
    j["rough_fractal_hi"] = g.rough_fractal_hi;
    j["terrain"] = {{"length", g.terrain.length},
                    {"dx", g.terrain.dx},
                    {"gap_count", g.terrain.gap_count},
                    {"obstacle_count", g.terrain.obstacle_count},
                    {"stair_run", g.terrain.stair_run},
                    {"stone_length", g.terrain.stone_length}};
    return j;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    get(j, "architecture", cfg.architecture);
    get(j, "baseline", cfg.baseline);
    get(j, "seed", cfg.seed);
    get(j, "work_mode", cfg.work_mode);
    if (j.contains("grid")) parse_grid(j.at("grid"), cfg.grid);
    if (j.contains("dims")) {
        const json& d = j.at("dims");
        get(d, "gamma_dim", cfg.dims.gamma_dim);
        get(d, "z_dim", cfg.dims.z_dim);
        get(d, "gru_hidden", cfg.dims.gru_hidden);
        get(d, "enc_hidden", cfg.dims.enc_hidden);
        get(d, "base_hidden", cfg.dims.base_hidden);
        get(d, "est_gru_hidden", cfg.dims.est_gru_hidden);
        get(d, "init_log_std", cfg.dims.init_log_std);
    }
    if (j.contains("phase1")) {
        const json& p = j.at("phase1");
        get(p, "env_steps", cfg.phase1_env_steps);
        get(p, "num_envs", cfg.phase1.num_envs);
        get(p, "steps_per_env", cfg.phase1.steps_per_env);
        get(p, "threads", cfg.phase1.threads);
        get(p, "curriculum", cfg.phase1.curriculum);
        if (p.contains("ppo")) {
            const json& q = p.at("ppo");
            get(q, "gamma", cfg.phase1.ppo.gamma);
            get(q, "lam", cfg.phase1.ppo.lam);
            get(q, "clip", cfg.phase1.ppo.clip);
            get(q, "epochs", cfg.phase1.ppo.epochs);
            get(q, "minibatches", cfg.phase1.ppo.minibatches);
            get(q, "entropy_coef", cfg.phase1.ppo.entropy_coef);
            get(q, "value_coef", cfg.phase1.ppo.value_coef);
            get(q, "lr", cfg.phase1.ppo.lr);
            get(q, "kl_limit", cfg.phase1.ppo.kl_limit);
            get(q, "max_grad_norm", cfg.phase1.ppo.max_grad_norm);
            get(q, "seg_len", cfg.phase1.ppo.seg_len);
        }
    }
    if (j.contains("phase2")) {
        const json& p = j.at("phase2");
        get(p, "iterations", cfg.phase2_iterations);
        get(p, "num_envs", cfg.phase2.num_envs);
        get(p, "seg_len", cfg.phase2.seg_len);
        get(p, "lr", cfg.phase2.lr);
    }
    if (j.contains("env")) {
        const json& e = j.at("env");
        get(e, "episode_seconds", cfg.env.episode_seconds);
        get(e, "pushes", cfg.env.pushes);
        get(e, "obs_noise", cfg.env.obs_noise);
        get(e, "randomize_dynamics", cfg.env.randomize_dynamics);
        get(e, "init_jitter", cfg.env.init_jitter);
        if (e.contains("reward_scales")) {
            const json& r = e.at("reward_scales");
            get(r, "work", cfg.env.reward.scales.work);
            get(r, "tracking", cfg.env.reward.scales.tracking);
            get(r, "foot_jerk", cfg.env.reward.scales.foot_jerk);
            get(r, "feet_drag", cfg.env.reward.scales.feet_drag);
            get(r, "collision", cfg.env.reward.scales.collision);
            get(r, "survival", cfg.env.reward.scales.survival);
        }
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        get(e, "episodes_per_terrain", cfg.eval.episodes_per_terrain);
        get(e, "episode_seconds", cfg.eval.episode_seconds);
        get(e, "command", cfg.eval.command);
        if (e.contains("columns")) cfg.eval.columns = e.at("columns").get<std::vector<int>>();
    }
    cfg.phase1.seed = cfg.seed;
    cfg.phase2.seed = cfg.seed + 1;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

std::string to_json_text(const ExperimentConfig& cfg) {
    json j;
    j["architecture"] = cfg.architecture;
    j["baseline"] = cfg.baseline;
    j["seed"] = cfg.seed;
    j["work_mode"] = cfg.work_mode;
    j["grid"] = grid_to_json(cfg.grid);
    j["dims"] = {{"gamma_dim", cfg.dims.gamma_dim},
                 {"z_dim", cfg.dims.z_dim},
                 {"gru_hidden", cfg.dims.gru_hidden},
                 {"enc_hidden", cfg.dims.enc_hidden},
                 {"base_hidden", cfg.dims.base_hidden},
                 {"est_gru_hidden", cfg.dims.est_gru_hidden},
                 {"init_log_std", cfg.dims.init_log_std}};
    j["phase1"] = {{"env_steps", cfg.phase1_env_steps},
                   {"num_envs", cfg.phase1.num_envs},
                   {"steps_per_env", cfg.phase1.steps_per_env},
                   {"threads", cfg.phase1.threads},
                   {"curriculum", cfg.phase1.curriculum},
                   {"ppo",
                    {{"gamma", cfg.phase1.ppo.gamma},
                     {"lam", cfg.phase1.ppo.lam},
                     {"clip", cfg.phase1.ppo.clip},
                     {"epochs", cfg.phase1.ppo.epochs},
                     {"minibatches", cfg.phase1.ppo.minibatches},
                     {"entropy_coef", cfg.phase1.ppo.entropy_coef},
                     {"value_coef", cfg.phase1.ppo.value_coef},
                     {"lr", cfg.phase1.ppo.lr},
                     {"kl_limit", cfg.phase1.ppo.kl_limit},
                     {"max_grad_norm", cfg.phase1.ppo.max_grad_norm},
                     {"seg_len", cfg.phase1.ppo.seg_len}}}};
    j["phase2"] = {{"iterations", cfg.phase2_iterations},
                   {"num_envs", cfg.phase2.num_envs},
                   {"seg_len", cfg.phase2.seg_len},
                   {"lr", cfg.phase2.lr}};
    j["env"] = {{"episode_seconds", cfg.env.episode_seconds},
                {"pushes", cfg.env.pushes},
                {"obs_noise", cfg.env.obs_noise},
                {"randomize_dynamics", cfg.env.randomize_dynamics},
                {"init_jitter", cfg.env.init_jitter},
                {"reward_scales",
                 {{"work", cfg.env.reward.scales.work},
                  {"tracking", cfg.env.reward.scales.tracking},
                  {"foot_jerk", cfg.env.reward.scales.foot_jerk},
                  {"feet_drag", cfg.env.reward.scales.feet_drag},
                  {"collision", cfg.env.reward.scales.collision},
                  {"survival", cfg.env.reward.scales.survival}}}};
    j["eval"] = {{"episodes_per_terrain", cfg.eval.episodes_per_terrain},
                 {"episode_seconds", cfg.eval.episode_seconds},
                 {"command", cfg.eval.command},
                 {"columns", cfg.eval.columns}};
    return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a(to_json_text(cfg)); }

}  // namespace visloco::config

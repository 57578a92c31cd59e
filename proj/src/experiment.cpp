#include "visloco/experiment.hpp"

#include "visloco/checkpoint.hpp"
#include "visloco/phase1.hpp"
#include "visloco/phase2.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace visloco::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hash_hex(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

struct Workspace {
    config::ExperimentConfig cfg;
    std::string out_dir;
    std::string hash;
    json manifest;

    std::string path(const std::string& name) const { return (fs::path(out_dir) / name).string(); }

    void save_manifest() const {
        std::ofstream out(manifest_path(out_dir));
        if (!out) throw std::runtime_error("cannot write manifest in " + out_dir);
        out << manifest.dump(2);
    }

    bool stage_complete(const std::string& stage) const {
        return manifest.contains("stages") && manifest["stages"].contains(stage) &&
               manifest["stages"][stage].value("status", "") == "complete";
    }

    void mark_stage(const std::string& stage, json info) {
        info["status"] = "complete";
        manifest["stages"][stage] = std::move(info);
        save_manifest();
    }
};

Workspace open_workspace(const StageOptions& opt, const std::string& stage) {
    Workspace ws;
    ws.cfg = config::load_config(opt.config_path);
    if (opt.seed_override) {
        ws.cfg.seed = *opt.seed_override;
        ws.cfg.phase1.seed = ws.cfg.seed;
        ws.cfg.phase2.seed = ws.cfg.seed + 1;
    }
    ws.out_dir = opt.out_dir;
    ws.hash = hash_hex(config::config_hash(ws.cfg));
    fs::create_directories(ws.out_dir);

    const std::string mpath = manifest_path(ws.out_dir);
    if (fs::exists(mpath)) {
        std::ifstream in(mpath);
        in >> ws.manifest;
        const std::string existing = ws.manifest.value("config_hash", "");
        if (existing != ws.hash && !opt.force) {
            throw std::runtime_error(
                "output directory holds results for a different config hash (" + existing +
                " vs " + ws.hash + "); use --force to overwrite");
        }
        if (existing != ws.hash && opt.force) {
            ws.manifest = json::object();
        }
        if (existing == ws.hash && !stage.empty() && ws.stage_complete(stage) && !opt.force) {
            throw std::runtime_error("stage '" + stage +
                                     "' already complete for this config hash; use --force");
        }
    }
    ws.manifest["config_hash"] = ws.hash;
    ws.manifest["seed"] = ws.cfg.seed;
    ws.manifest["work_mode"] = ws.cfg.work_mode;
    ws.manifest["architecture"] = ws.cfg.architecture;
    ws.manifest["baseline"] = ws.cfg.baseline;
    ws.manifest["config"] = json::parse(config::to_json_text(ws.cfg));
    ws.save_manifest();
    return ws;
}

std::string policy_id(const config::ExperimentConfig& cfg, int phase) {
    std::string id = cfg.architecture;
    if (cfg.baseline != "none") id += "-" + cfg.baseline;
    id += phase == 1 ? "-p1" : "-p2";
    return id;
}

}  // namespace

std::string manifest_path(const std::string& out_dir) {
    return (fs::path(out_dir) / "manifest.json").string();
}

void train_phase1(const StageOptions& opt) {
    Workspace ws = open_workspace(opt, "phase1");
    const auto& cfg = ws.cfg;

    terrain::TerrainGrid grid = terrain::build_grid(cfg.grid, cfg.seed);
    Rng init_rng(Rng(cfg.seed).derive(0xA11CE).seed());
    auto policy = policy::make_phase1_policy(cfg.architecture, cfg.dims, init_rng);
    phase1::Trainer trainer(*policy, cfg.phase1_env(), grid, cfg.phase1);

    std::ofstream metrics(ws.path("phase1_metrics.csv"));
    phase1::Trainer::write_metrics_header(metrics);

    const long per_iter = static_cast<long>(cfg.phase1.num_envs) * cfg.phase1.steps_per_env;
    const long iters = (cfg.phase1_env_steps + per_iter - 1) / per_iter;
    for (long it = 0; it < iters; ++it) {
        phase1::IterStats s = trainer.iterate();
        phase1::Trainer::write_metrics_row(metrics, static_cast<int>(it), s);
        if (it % 50 == 0) {
            metrics.flush();
            std::cout << "[phase1] iter " << it << "/" << iters << " steps " << s.env_steps
                      << " ep_return " << s.episode_return << " dist " << s.episode_distance
                      << " col " << s.mean_col << std::endl;
        }
    }

    checkpoint::Meta meta;
    meta.architecture = cfg.architecture;
    meta.phase = 1;
    meta.extra["baseline"] = cfg.baseline;
    meta.extra["policy_id"] = policy_id(cfg, 1);
    meta.extra["work_mode"] = cfg.work_mode;
    checkpoint::save(ws.path("phase1_checkpoint.json"), policy->params(), meta);

    ws.mark_stage("phase1", {{"env_steps", trainer.total_env_steps()},
                             {"checkpoint", "phase1_checkpoint.json"},
                             {"metrics", "phase1_metrics.csv"}});
}

void distill_phase2(const StageOptions& opt, std::string teacher_checkpoint) {
    Workspace ws = open_workspace(opt, "phase2");
    const auto& cfg = ws.cfg;
    if (teacher_checkpoint.empty()) teacher_checkpoint = ws.path("phase1_checkpoint.json");

    terrain::TerrainGrid grid = terrain::build_grid(cfg.grid, cfg.seed);
    Rng init_rng(Rng(cfg.seed).derive(0xA11CE).seed());
    Rng student_rng(Rng(cfg.seed).derive(0x57D).seed());

    std::ofstream metrics(ws.path("phase2_metrics.csv"));
    phase2::write_distill_header(metrics);

    json stage_info = {{"teacher", teacher_checkpoint},
                       {"checkpoint", "phase2_checkpoint.json"},
                       {"metrics", "phase2_metrics.csv"}};
    checkpoint::Meta meta;
    meta.architecture = cfg.architecture;
    meta.phase = 2;
    meta.extra["baseline"] = cfg.baseline;
    meta.extra["policy_id"] = policy_id(cfg, 2);
    meta.extra["work_mode"] = cfg.work_mode;

    if (cfg.architecture == "monolithic") {
        policy::MonolithicPolicy teacher(cfg.dims, init_rng);
        const checkpoint::Meta tmeta = checkpoint::load(teacher_checkpoint, teacher.params());
        if (tmeta.architecture != "monolithic") {
            throw std::runtime_error("teacher checkpoint architecture mismatch");
        }
        policy::MonolithicStudent student(cfg.dims, teacher, student_rng);
        phase2::MonolithicDistiller distiller(teacher, student, cfg.phase2_env(), grid,
                                              cfg.phase2);
        for (int it = 0; it < cfg.phase2_iterations; ++it) {
            phase2::IterStats s = distiller.iterate();
            phase2::write_distill_row(metrics, it, s);
            if (it % 100 == 0) {
                metrics.flush();
                std::cout << "[phase2] iter " << it << "/" << cfg.phase2_iterations
                          << " action_mse " << s.action_mse << std::endl;
            }
        }
        checkpoint::save(ws.path("phase2_checkpoint.json"), student.checkpoint_params(), meta);

        auto teacher_act = [&teacher](const policy::PolicyObs& o, Vec& h) {
            return teacher.act(o, h, nullptr).mean;
        };
        auto student_act = [&student](const policy::PolicyObs& o, Vec& h) {
            return student.act(o, h);
        };
        // held-out action-gap statistics feed the bound instantiation
        phase2::ActionGapStats gap = phase2::evaluate_distillation(
            teacher_act, teacher.hidden_dim(), student_act, student.hidden_dim(), cfg.phase2_env(),
            grid, 4, cfg.seed + 17);
        stage_info["eta_hat_max"] = gap.max_gap;
        stage_info["eta_hat_p95"] = gap.p95;
        stage_info["eta_hat_mean"] = gap.mean;
    } else {
        policy::RmaPolicy teacher(cfg.dims, init_rng);
        const checkpoint::Meta tmeta = checkpoint::load(teacher_checkpoint, teacher.params());
        if (tmeta.architecture != "rma") {
            throw std::runtime_error("teacher checkpoint architecture mismatch");
        }
        policy::RmaStudent student(cfg.dims, teacher, student_rng);
        phase2::RmaDistiller distiller(teacher, student, cfg.phase2_env(), grid, cfg.phase2);
        for (int it = 0; it < cfg.phase2_iterations; ++it) {
            phase2::IterStats s = distiller.iterate();
            phase2::write_distill_row(metrics, it, s);
            if (it % 100 == 0) {
                metrics.flush();
                std::cout << "[phase2] iter " << it << "/" << cfg.phase2_iterations
                          << " gamma_mse " << s.gamma_mse << " z_mse " << s.z_mse << std::endl;
            }
        }
        checkpoint::save(ws.path("phase2_checkpoint.json"), student.checkpoint_params(), meta);

        auto teacher_act = [&teacher](const policy::PolicyObs& o, Vec& h) {
            return teacher.act(o, h, nullptr).mean;
        };
        auto student_act = [&student](const policy::PolicyObs& o, Vec& h) {
            return student.act(o, h);
        };
        phase2::ActionGapStats gap = phase2::evaluate_distillation(
            teacher_act, teacher.hidden_dim(), student_act, student.hidden_dim(), cfg.phase2_env(),
            grid, 4, cfg.seed + 17);
        stage_info["eta_hat_max"] = gap.max_gap;
        stage_info["eta_hat_p95"] = gap.p95;
        stage_info["eta_hat_mean"] = gap.mean;
    }
    ws.mark_stage("phase2", stage_info);
}

LoadedPolicy load_policy(const std::string& checkpoint_path, const config::ExperimentConfig& cfg) {
    const checkpoint::Meta meta = checkpoint::peek(checkpoint_path);
    LoadedPolicy lp;
    lp.architecture = meta.architecture;
    lp.phase = meta.phase;
    lp.baseline = meta.extra.count("baseline") ? meta.extra.at("baseline") : "none";
    Rng rng(Rng(cfg.seed).derive(0xA11CE).seed());

    if (meta.phase == 1) {
        auto pol = std::shared_ptr<policy::Phase1Policy>(
            policy::make_phase1_policy(meta.architecture, cfg.dims, rng));
        (void)checkpoint::load(checkpoint_path, pol->params());
        lp.hidden_dim = pol->hidden_dim();
        lp.student_channels = false;
        lp.act = [pol](const policy::PolicyObs& o, Vec& h) { return pol->act(o, h, nullptr).mean; };
        lp.holder = pol;
        return lp;
    }
    if (meta.phase != 2) throw std::runtime_error("unsupported checkpoint phase");
    if (meta.architecture == "monolithic") {
        policy::MonolithicPolicy teacher(cfg.dims, rng);
        auto student = std::make_shared<policy::MonolithicStudent>(cfg.dims, teacher, rng);
        (void)checkpoint::load(checkpoint_path, student->checkpoint_params());
        lp.hidden_dim = student->hidden_dim();
        lp.student_channels = true;
        lp.act = [student](const policy::PolicyObs& o, Vec& h) { return student->act(o, h); };
        lp.holder = student;
        return lp;
    }
    policy::RmaPolicy teacher(cfg.dims, rng);
    auto student = std::make_shared<policy::RmaStudent>(cfg.dims, teacher, rng);
    (void)checkpoint::load(checkpoint_path, student->checkpoint_params());
    lp.hidden_dim = student->hidden_dim();
    lp.student_channels = true;
    lp.act = [student](const policy::PolicyObs& o, Vec& h) { return student->act(o, h); };
    lp.holder = student;
    return lp;
}

void evaluate(const StageOptions& opt, std::string checkpoint_file) {
    Workspace ws = open_workspace(opt, "");  // evaluation may be repeated freely
    const auto& cfg = ws.cfg;
    if (checkpoint_file.empty()) {
        checkpoint_file = fs::exists(ws.path("phase2_checkpoint.json"))
                              ? ws.path("phase2_checkpoint.json")
                              : ws.path("phase1_checkpoint.json");
    }
    LoadedPolicy lp = load_policy(checkpoint_file, cfg);

    terrain::TerrainGrid grid = terrain::build_grid(cfg.grid, cfg.seed);
    const std::string id =
        checkpoint::peek(checkpoint_file).extra.count("policy_id")
            ? checkpoint::peek(checkpoint_file).extra.at("policy_id")
            : policy_id(cfg, lp.phase);
    auto results = eval::eval_policy(lp.act, lp.hidden_dim, lp.student_channels,
                                     cfg.eval_env(lp.student_channels), grid, cfg.eval, cfg.seed,
                                     id);
    const std::string out_csv = "eval_" + id + ".csv";
    eval::write_eval_csv(ws.path(out_csv), results);
    json info = {{"checkpoint", checkpoint_file}, {"results", out_csv}};
    ws.mark_stage("eval-" + id, info);
    std::cout << "[eval] wrote " << ws.path(out_csv) << std::endl;
}

void run_all(const StageOptions& opt) {
    train_phase1(opt);
    distill_phase2(opt);
    evaluate(opt);
}

}  // namespace visloco::experiment

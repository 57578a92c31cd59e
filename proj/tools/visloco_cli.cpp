// Command-line front end. Links only the C API.
#include <visloco.h>

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

char err_buf[1024];

int finish(vl_status st, const char* what) {
    if (st == VL_OK) return 0;
    std::fprintf(stderr, "%s failed (%s): %s\n", what, vl_status_name(st), err_buf);
    return static_cast<int>(st);
}

int finish_exp(vl_status st, const char* what, vl_experiment* exp) {
    if (st == VL_OK) return 0;
    std::fprintf(stderr, "%s failed (%s): %s\n", what, vl_status_name(st),
                 vl_experiment_last_error(exp));
    return static_cast<int>(st);
}

struct StageArgs {
    std::string config;
    std::string out;
    long long seed = -1;
    bool force = false;
};

void add_stage_options(CLI::App* cmd, StageArgs& args) {
    cmd->add_option("--config", args.config, "experiment config file (JSON)")->required();
    cmd->add_option("--out", args.out, "output directory")->required();
    cmd->add_option("--seed", args.seed, "seed override (default: config seed)");
    cmd->add_flag("--force", args.force, "overwrite results for an existing config hash");
}

int run_stage(const StageArgs& args, const char* what,
              vl_status (*stage)(vl_experiment*, const char*), const std::string& extra) {
    err_buf[0] = '\0';
    vl_experiment* exp = nullptr;
    vl_status st = vl_experiment_open(args.config.c_str(), args.out.c_str(), args.seed,
                                      args.force ? 1 : 0, &exp, err_buf, sizeof(err_buf));
    if (st != VL_OK) return finish(st, what);
    st = stage(exp, extra.empty() ? nullptr : extra.c_str());
    const int rc = finish_exp(st, what, exp);
    vl_experiment_close(exp);
    return rc;
}

vl_status stage_phase1(vl_experiment* exp, const char*) { return vl_experiment_train_phase1(exp); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"visloco: planar legged walker lab (two-phase visual locomotion training)"};
    app.require_subcommand(1);

    // gen-terrain
    auto* gen = app.add_subcommand("gen-terrain", "generate a heightfield CSV");
    std::string kind = "flat", gen_out = "terrain.csv";
    double difficulty = 0.5, fractal = 0.0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--kind", kind,
                    "flat|slope|stairs_up|stairs_down|discrete_obstacles|gaps|stepping_stones");
    gen->add_option("--difficulty", difficulty, "difficulty in [0,1]");
    gen->add_option("--fractal", fractal, "fractal overlay amplitude, meters");
    gen->add_option("--seed", gen_seed, "seed");
    gen->add_option("--out", gen_out, "output CSV path")->required();

    // train-phase1 / distill-phase2 / eval
    StageArgs p1_args, p2_args, ev_args, all_args;
    auto* p1 = app.add_subcommand("train-phase1", "reinforcement learning from scandots");
    add_stage_options(p1, p1_args);
    auto* p2 = app.add_subcommand("distill-phase2", "supervised distillation to depth");
    add_stage_options(p2, p2_args);
    std::string teacher;
    p2->add_option("--teacher", teacher, "phase-1 teacher checkpoint (default: out dir)");
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint over the terrain grid");
    add_stage_options(ev, ev_args);
    std::string ckpt;
    ev->add_option("--checkpoint", ckpt, "checkpoint to evaluate (default: newest in out dir)");
    auto* all = app.add_subcommand("run", "full pipeline: phase1, phase2, eval");
    add_stage_options(all, all_args);

    // compare
    auto* cmp = app.add_subcommand("compare", "merge eval CSVs into a ranking report");
    std::vector<std::string> inputs;
    std::string cmp_out = "report.md";
    cmp->add_option("inputs", inputs, "eval CSV files")->required()->expected(-2);
    cmp->add_option("--out", cmp_out, "output markdown path");

    // verify-bound
    auto* vb = app.add_subcommand("verify-bound", "suboptimality-bound ensemble on tabular MDPs");
    vl_bound_opts opts{};
    std::string vb_out = "bound_report.json";
    long long vb_seed = 0;
    vb->add_option("--ensemble-size", opts.instances, "number of generated MDPs (default 200)");
    vb->add_option("--gamma", opts.gamma, "discount (default: both 0.9 and 0.99)");
    vb->add_option("--grid", opts.action_grid, "action grid size (default: 5 and 11)");
    vb->add_option("--states", opts.max_states, "state count (default: 5/10/20 mix)");
    vb->add_option("--seed", vb_seed, "seed");
    vb->add_option("--out", vb_out, "output JSON report path");

    CLI11_PARSE(app, argc, argv);

    err_buf[0] = '\0';
    if (gen->parsed()) {
        return finish(vl_gen_terrain(kind.c_str(), difficulty, fractal, gen_seed, gen_out.c_str(),
                                     err_buf, sizeof(err_buf)),
                      "gen-terrain");
    }
    if (p1->parsed()) return run_stage(p1_args, "train-phase1", &stage_phase1, "");
    if (p2->parsed()) {
        return run_stage(p2_args, "distill-phase2", &vl_experiment_distill_phase2, teacher);
    }
    if (ev->parsed()) return run_stage(ev_args, "eval", &vl_experiment_eval, ckpt);
    if (all->parsed()) {
        return run_stage(all_args, "run",
                         [](vl_experiment* e, const char*) { return vl_experiment_run_all(e); },
                         "");
    }
    if (cmp->parsed()) {
        std::vector<const char*> ptrs;
        for (const auto& s : inputs) ptrs.push_back(s.c_str());
        return finish(vl_compare(ptrs.data(), ptrs.size(), cmp_out.c_str(), err_buf,
                                 sizeof(err_buf)),
                      "compare");
    }
    if (vb->parsed()) {
        opts.seed = static_cast<std::uint64_t>(vb_seed);
        int violations = 0;
        const vl_status st = vl_verify_bound(&opts, vb_out.c_str(), &violations, err_buf,
                                             sizeof(err_buf));
        if (st == VL_OK) std::printf("bound ensemble: %d violations, report at %s\n", violations,
                                     vb_out.c_str());
        return finish(st, "verify-bound");
    }
    return 0;
}

#include "visloco.h"

#include "visloco/config.hpp"
#include "visloco/eval.hpp"
#include "visloco/experiment.hpp"
#include "visloco/mdp.hpp"
#include "visloco/terrain.hpp"

#include <cstring>
#include <string>

namespace {

constexpr const char* kVersion = "0.1.0";

struct ErrorSink {
    std::string message;
    vl_status code = VL_OK;
};

void write_err(char* buf, size_t len, const std::string& msg) {
    if (!buf || len == 0) return;
    const size_t n = std::min(len - 1, msg.size());
    std::memcpy(buf, msg.data(), n);
    buf[n] = '\0';
}

vl_status classify(const std::exception& e) {
    if (dynamic_cast<const std::invalid_argument*>(&e)) return VL_ERR_INVALID_ARGUMENT;
    const std::string what = e.what();
    if (what.find("--force") != std::string::npos) return VL_ERR_EXISTS;
    if (what.find("cannot open") != std::string::npos ||
        what.find("cannot write") != std::string::npos) {
        return VL_ERR_IO;
    }
    if (what.find("config") != std::string::npos) return VL_ERR_CONFIG;
    return VL_ERR_RUNTIME;
}

template <typename Fn>
vl_status guarded(ErrorSink* sink, char* err_buf, size_t err_len, Fn&& fn) {
    try {
        fn();
        if (sink) {
            sink->message.clear();
            sink->code = VL_OK;
        }
        return VL_OK;
    } catch (const std::exception& e) {
        const vl_status code = classify(e);
        if (sink) {
            sink->message = e.what();
            sink->code = code;
        }
        write_err(err_buf, err_len, e.what());
        return code;
    } catch (...) {
        if (sink) {
            sink->message = "unknown error";
            sink->code = VL_ERR_RUNTIME;
        }
        write_err(err_buf, err_len, "unknown error");
        return VL_ERR_RUNTIME;
    }
}

}  // namespace

struct vl_experiment {
    visloco::experiment::StageOptions opt;
    ErrorSink err;
};

extern "C" {

const char* vl_version(void) { return kVersion; }

const char* vl_status_name(vl_status s) {
    switch (s) {
        case VL_OK: return "ok";
        case VL_ERR_INVALID_ARGUMENT: return "invalid argument";
        case VL_ERR_IO: return "io error";
        case VL_ERR_CONFIG: return "config error";
        case VL_ERR_EXISTS: return "already exists";
        case VL_ERR_RUNTIME: return "runtime error";
    }
    return "unknown";
}

vl_status vl_experiment_open(const char* config_path, const char* out_dir, int64_t seed_override,
                             int force, vl_experiment** out, char* err_buf, size_t err_len) {
    if (!out || !config_path || !out_dir) {
        write_err(err_buf, err_len, "null argument");
        return VL_ERR_INVALID_ARGUMENT;
    }
    *out = nullptr;
    auto handle = std::make_unique<vl_experiment>();
    handle->opt.config_path = config_path;
    handle->opt.out_dir = out_dir;
    if (seed_override >= 0) handle->opt.seed_override = static_cast<std::uint64_t>(seed_override);
    handle->opt.force = force != 0;
    // validate the config up front so open fails fast on malformed input
    const vl_status st = guarded(nullptr, err_buf, err_len,
                                 [&]() { (void)visloco::config::load_config(config_path); });
    if (st != VL_OK) return st;
    *out = handle.release();
    return VL_OK;
}

void vl_experiment_close(vl_experiment* exp) { delete exp; }

const char* vl_experiment_last_error(const vl_experiment* exp) {
    return exp ? exp->err.message.c_str() : "";
}

vl_status vl_experiment_train_phase1(vl_experiment* exp) {
    if (!exp) return VL_ERR_INVALID_ARGUMENT;
    return guarded(&exp->err, nullptr, 0,
                   [&]() { visloco::experiment::train_phase1(exp->opt); });
}

vl_status vl_experiment_distill_phase2(vl_experiment* exp, const char* teacher_checkpoint) {
    if (!exp) return VL_ERR_INVALID_ARGUMENT;
    return guarded(&exp->err, nullptr, 0, [&]() {
        visloco::experiment::distill_phase2(exp->opt,
                                            teacher_checkpoint ? teacher_checkpoint : "");
    });
}

vl_status vl_experiment_eval(vl_experiment* exp, const char* checkpoint) {
    if (!exp) return VL_ERR_INVALID_ARGUMENT;
    return guarded(&exp->err, nullptr, 0,
                   [&]() { visloco::experiment::evaluate(exp->opt, checkpoint ? checkpoint : ""); });
}

vl_status vl_experiment_run_all(vl_experiment* exp) {
    if (!exp) return VL_ERR_INVALID_ARGUMENT;
    return guarded(&exp->err, nullptr, 0, [&]() { visloco::experiment::run_all(exp->opt); });
}

vl_status vl_gen_terrain(const char* kind, double difficulty, double fractal_amplitude,
                         uint64_t seed, const char* out_csv, char* err_buf, size_t err_len) {
    if (!kind || !out_csv) {
        write_err(err_buf, err_len, "null argument");
        return VL_ERR_INVALID_ARGUMENT;
    }
    return guarded(nullptr, err_buf, err_len, [&]() {
        using namespace visloco::terrain;
        Heightfield hf = generate_terrain(kind_from_name(kind), difficulty, seed, {});
        if (fractal_amplitude > 0.0) hf = add_fractal(hf, fractal_amplitude, seed + 1);
        save_csv(hf, out_csv);
    });
}

vl_status vl_verify_bound(const vl_bound_opts* opts, const char* out_json, int* violations_out,
                          char* err_buf, size_t err_len) {
    if (!out_json) {
        write_err(err_buf, err_len, "null output path");
        return VL_ERR_INVALID_ARGUMENT;
    }
    return guarded(nullptr, err_buf, err_len, [&]() {
        visloco::mdp::EnsembleConfig cfg;
        if (opts) {
            if (opts->instances > 0) cfg.instances = opts->instances;
            if (opts->gamma > 0.0) cfg.gammas = {opts->gamma};
            if (opts->action_grid > 0) cfg.action_counts = {opts->action_grid};
            if (opts->max_states > 0) cfg.state_counts = {opts->max_states};
            cfg.seed = opts->seed;
        }
        visloco::mdp::EnsembleResult res = visloco::mdp::run_ensemble(cfg);
        visloco::mdp::write_ensemble_report(res, cfg, out_json);
        if (violations_out) *violations_out = res.violations;
    });
}

vl_status vl_compare(const char* const* eval_csv_paths, size_t count, const char* out_markdown,
                     char* err_buf, size_t err_len) {
    if (!eval_csv_paths || count < 2 || !out_markdown) {
        write_err(err_buf, err_len, "need at least two eval CSVs and an output path");
        return VL_ERR_INVALID_ARGUMENT;
    }
    return guarded(nullptr, err_buf, err_len, [&]() {
        std::vector<std::vector<visloco::eval::EvalResult>> methods;
        for (size_t i = 0; i < count; ++i) {
            methods.push_back(visloco::eval::read_eval_csv(eval_csv_paths[i]));
        }
        const std::string md = visloco::eval::compare_methods(methods);
        std::ofstream out(out_markdown);
        if (!out) throw std::runtime_error(std::string("cannot write ") + out_markdown);
        out << md;
    });
}

}  // extern "C"

/* C interface to the visloco library: planar visual-locomotion training lab.
 *
 * All heavy operations are file-driven: configs in, artifacts out. Stage
 * functions run against an opaque experiment handle; stateless utilities take
 * an error buffer instead.
 */
#ifndef VISLOCO_H
#define VISLOCO_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define VL_API __declspec(dllexport)
#else
#define VL_API __attribute__((visibility("default")))
#endif

typedef enum vl_status {
    VL_OK = 0,
    VL_ERR_INVALID_ARGUMENT = 1,
    VL_ERR_IO = 2,
    VL_ERR_CONFIG = 3,
    VL_ERR_EXISTS = 4, /* refused: results for this config hash already present */
    VL_ERR_RUNTIME = 5
} vl_status;

VL_API const char* vl_version(void);
VL_API const char* vl_status_name(vl_status s);

/* ------------------------------------------------------------------ */
/* Experiment handle: bound to (config file, output directory, seed).  */

typedef struct vl_experiment vl_experiment;

/* Opens an experiment. seed_override < 0 keeps the config's seed. On failure
 * returns a status and writes a message into err_buf (if given); no handle is
 * created. */
VL_API vl_status vl_experiment_open(const char* config_path, const char* out_dir,
                                    int64_t seed_override, int force, vl_experiment** out,
                                    char* err_buf, size_t err_len);
VL_API void vl_experiment_close(vl_experiment* exp);
VL_API const char* vl_experiment_last_error(const vl_experiment* exp);

VL_API vl_status vl_experiment_train_phase1(vl_experiment* exp);
/* teacher_checkpoint NULL: use <out_dir>/phase1_checkpoint.json */
VL_API vl_status vl_experiment_distill_phase2(vl_experiment* exp, const char* teacher_checkpoint);
/* checkpoint NULL: newest checkpoint in the output directory */
VL_API vl_status vl_experiment_eval(vl_experiment* exp, const char* checkpoint);
VL_API vl_status vl_experiment_run_all(vl_experiment* exp);

/* ------------------------------------------------------------------ */
/* Stateless utilities.                                                */

/* Writes a heightfield CSV (columns x,height). kind: flat, slope, stairs_up,
 * stairs_down, discrete_obstacles, gaps, stepping_stones. */
VL_API vl_status vl_gen_terrain(const char* kind, double difficulty, double fractal_amplitude,
                                uint64_t seed, const char* out_csv, char* err_buf, size_t err_len);

typedef struct vl_bound_opts {
    int instances;   /* <= 0: 200 */
    double gamma;    /* <= 0: both 0.9 and 0.99 */
    int action_grid; /* <= 0: grids of 5 and 11 actions */
    int max_states;  /* <= 0: 5/10/20-state mix; otherwise a single size */
    uint64_t seed;
} vl_bound_opts;

/* Runs the teacher-student suboptimality-bound ensemble and writes a JSON
 * report. violations_out (optional) receives the violation count. */
VL_API vl_status vl_verify_bound(const vl_bound_opts* opts, const char* out_json,
                                 int* violations_out, char* err_buf, size_t err_len);

/* Merges evaluation CSVs into a markdown comparison table with ranking. */
VL_API vl_status vl_compare(const char* const* eval_csv_paths, size_t count,
                            const char* out_markdown, char* err_buf, size_t err_len);

#ifdef __cplusplus
}
#endif

#endif /* VISLOCO_H */

#pragma once

#include "visloco/common.hpp"

#include <string>
#include <vector>

namespace visloco::mdp {

// Finite MDP whose action space is a uniform grid of points in [0,1] under
// the absolute-difference metric.
struct TabularMdp {
    int num_states = 0;
    std::vector<double> actions;            // grid points, ascending
    std::vector<Mat> P;                     // P[a](s, s') transition rows
    Mat R;                                  // R(s, a)
    double gamma = 0.99;

    int num_actions() const { return static_cast<int>(actions.size()); }
    void validate() const;  // rows stochastic within 1e-12, finite rewards
};

// Smooth parametric family: rewards and transitions vary continuously over
// the action grid, so the Lipschitz certificates stay meaningful. Rewards are
// non-negative.
struct GeneratorConfig {
    int num_states = 10;
    int num_actions = 11;
    double gamma = 0.99;
};

TabularMdp generate_lipschitz_mdp(const GeneratorConfig& cfg, std::uint64_t seed);

// Sup-norm fixed point of the Bellman optimality operator.
Vec value_iteration(const TabularMdp& mdp, double tol = 1e-10);

// Deterministic greedy policy; ties resolve to the smallest action index.
std::vector<int> greedy_policy(const TabularMdp& mdp, const Vec& V);

// Exact V^pi via a direct linear solve.
Vec policy_evaluation(const TabularMdp& mdp, const std::vector<int>& pi, double tol = 1e-10);

// Per-state uniform perturbation strictly inside (-eps, eps).
Vec perturb_value(const Vec& V, double eps, Rng& rng);
// Worst-case alternating +-(eps - delta) pattern.
Vec perturb_value_adversarial(const Vec& V, double eps);

// Each output action is a grid action strictly within eta of pi[s]; eta
// below the grid spacing returns pi unchanged. `directional` displaces as far
// as eta allows in a per-state seeded direction (used by the monotonicity
// probe); otherwise the displacement is sampled.
std::vector<int> perturb_policy(const TabularMdp& mdp, const std::vector<int>& pi, double eta,
                                Rng& rng, bool directional = false);

struct LipschitzCertificate {
    double L_R = 0.0;  // max |dR| / |da| over adjacent grid actions
    double L_P = 0.0;  // max sum_s' |dP| / |da| over adjacent grid actions
};

LipschitzCertificate estimate_lipschitz(const TabularMdp& mdp);

// Optional state relabeling f (the phase-2 policy may live in a relabeled
// state space; the bound is checked through f).
std::vector<int> identity_mapping(int n);
std::vector<int> random_bijection(int n, Rng& rng);

struct BoundReport {
    double eps = 0.0;
    double eta = 0.0;
    double gamma = 0.0;
    double L_R = 0.0;
    double L_P = 0.0;
    double c = 0.0;     // L_R + gamma * L_P * sum_s V*(s)
    double lhs = 0.0;   // max_s V*(s) - V^{pi2}(f(s))
    double rhs = 0.0;   // (2 eps gamma + eta c) / (1 - gamma)
    bool holds = false; // lhs <= rhs + 1e-9

    double slack() const { return rhs - lhs; }
};

struct BoundCheckOptions {
    double eps = 0.0;
    double eta = 0.0;
    bool adversarial_value = false;
    bool directional_policy = false;
    bool relabel_states = false;
};

// Builds V1 = perturb(V*, eps), pi1 = greedy(V1), pi2 = perturb(pi1, eta),
// evaluates pi2 exactly and checks the suboptimality bound.
BoundReport check_bound(const TabularMdp& mdp, const BoundCheckOptions& opt, Rng& rng);

struct EnsembleConfig {
    int instances = 200;
    std::vector<int> state_counts = {5, 10, 20};
    std::vector<int> action_counts = {5, 11};
    std::vector<double> gammas = {0.9, 0.99};
    std::vector<double> eps_grid = {0.0, 0.01, 0.1};
    std::vector<double> eta_grid = {0.0, 0.05, 0.1};
    std::uint64_t seed = 0;
};

struct EnsembleResult {
    std::vector<BoundReport> reports;
    int violations = 0;
    double min_slack = 0.0;
    double max_slack = 0.0;
    double min_rhs_over_lhs = 0.0;  // over reports with lhs > 0
    std::string counterexample_json;  // empty when no violation
};

EnsembleResult run_ensemble(const EnsembleConfig& cfg);

std::string mdp_to_json(const TabularMdp& mdp);
void write_ensemble_report(const EnsembleResult& result, const EnsembleConfig& cfg,
                           const std::string& path);

}  // namespace visloco::mdp

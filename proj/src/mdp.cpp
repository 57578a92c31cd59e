#include "visloco/mdp.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace visloco::mdp {

void TabularMdp::validate() const {
    if (num_states < 1 || num_actions() < 1) throw std::invalid_argument("mdp: empty");
    if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("mdp: gamma must be in (0,1)");
    if (R.rows() != num_states || R.cols() != num_actions()) {
        throw std::invalid_argument("mdp: reward shape mismatch");
    }
    for (int a = 0; a < num_actions(); ++a) {
        if (P[a].rows() != num_states || P[a].cols() != num_states) {
            throw std::invalid_argument("mdp: transition shape mismatch");
        }
        for (int s = 0; s < num_states; ++s) {
            const double sum = P[a].row(s).sum();
            if (std::abs(sum - 1.0) > 1e-12 || P[a].row(s).minCoeff() < -1e-15) {
                throw std::invalid_argument("mdp: non-stochastic transition row");
            }
        }
    }
    if (!R.allFinite()) throw std::invalid_argument("mdp: non-finite rewards");
}

TabularMdp generate_lipschitz_mdp(const GeneratorConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    TabularMdp mdp;
    mdp.num_states = cfg.num_states;
    mdp.gamma = cfg.gamma;
    for (int a = 0; a < cfg.num_actions; ++a) {
        mdp.actions.push_back(cfg.num_actions > 1
                                  ? static_cast<double>(a) / (cfg.num_actions - 1)
                                  : 0.0);
    }

    // R(s, a) = r0_s + r1_s * cos(pi (a - c_s)); coefficients keep R >= 0.
    mdp.R.resize(cfg.num_states, cfg.num_actions);
    for (int s = 0; s < cfg.num_states; ++s) {
        const double r1 = rng.uniform(0.1, 0.5);
        const double r0 = r1 + rng.uniform(0.0, 0.5);
        const double c = rng.uniform(0.0, 1.0);
        for (int a = 0; a < cfg.num_actions; ++a) {
            mdp.R(s, a) = r0 + r1 * std::cos(M_PI * (mdp.actions[a] - c));
        }
    }

    // P(.|s,a) interpolates two fixed distributions with a smooth weight.
    std::vector<Vec> d0(cfg.num_states), d1(cfg.num_states);
    auto random_dist = [&rng, &cfg]() {
        Vec d(cfg.num_states);
        double sum = 0.0;
        for (int i = 0; i < cfg.num_states; ++i) {
            d[i] = rng.uniform(0.05, 1.0);
            sum += d[i];
        }
        return Vec(d / sum);
    };
    for (int s = 0; s < cfg.num_states; ++s) {
        d0[s] = random_dist();
        d1[s] = random_dist();
    }
    mdp.P.assign(cfg.num_actions, Mat::Zero(cfg.num_states, cfg.num_states));
    for (int a = 0; a < cfg.num_actions; ++a) {
        const double w = 0.5 * (1.0 - std::cos(M_PI * mdp.actions[a]));
        for (int s = 0; s < cfg.num_states; ++s) {
            mdp.P[a].row(s) = ((1.0 - w) * d0[s] + w * d1[s]).transpose();
        }
    }
    mdp.validate();
    return mdp;
}

namespace {

Vec q_values(const TabularMdp& mdp, int s, const Vec& V) {
    Vec q(mdp.num_actions());
    for (int a = 0; a < mdp.num_actions(); ++a) {
        q[a] = mdp.R(s, a) + mdp.gamma * mdp.P[a].row(s).dot(V);
    }
    return q;
}

}  // namespace

Vec value_iteration(const TabularMdp& mdp, double tol) {
    mdp.validate();
    Vec V = Vec::Zero(mdp.num_states);
    Vec next(mdp.num_states);
    for (int iter = 0; iter < 1000000; ++iter) {
        for (int s = 0; s < mdp.num_states; ++s) {
            next[s] = q_values(mdp, s, V).maxCoeff();
        }
        const double resid = (next - V).cwiseAbs().maxCoeff();
        V = next;
        if (resid * mdp.gamma / (1.0 - mdp.gamma) < tol) break;
    }
    return V;
}

std::vector<int> greedy_policy(const TabularMdp& mdp, const Vec& V) {
    if (!V.allFinite()) throw std::invalid_argument("greedy_policy: non-finite V");
    std::vector<int> pi(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        const Vec q = q_values(mdp, s, V);
        int best = 0;
        for (int a = 1; a < mdp.num_actions(); ++a) {
            if (q[a] > q[best]) best = a;  // strict: ties keep the smaller index
        }
        pi[s] = best;
    }
    return pi;
}

Vec policy_evaluation(const TabularMdp& mdp, const std::vector<int>& pi, double tol) {
    mdp.validate();
    (void)tol;  // direct solve is exact to machine precision
    Mat P_pi(mdp.num_states, mdp.num_states);
    Vec R_pi(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        P_pi.row(s) = mdp.P[pi[s]].row(s);
        R_pi[s] = mdp.R(s, pi[s]);
    }
    Mat A = Mat::Identity(mdp.num_states, mdp.num_states) - mdp.gamma * P_pi;
    return A.partialPivLu().solve(R_pi);
}

Vec perturb_value(const Vec& V, double eps, Rng& rng) {
    if (eps < 0.0) throw std::invalid_argument("perturb_value: eps must be >= 0");
    Vec out = V;
    for (Eigen::Index s = 0; s < V.size(); ++s) {
        out[s] += eps * 0.999999 * rng.uniform(-1.0, 1.0);
    }
    return out;
}

Vec perturb_value_adversarial(const Vec& V, double eps) {
    Vec out = V;
    for (Eigen::Index s = 0; s < V.size(); ++s) {
        out[s] += (s % 2 == 0 ? 1.0 : -1.0) * eps * 0.999999;
    }
    return out;
}

std::vector<int> perturb_policy(const TabularMdp& mdp, const std::vector<int>& pi, double eta,
                                Rng& rng, bool directional) {
    if (eta < 0.0) throw std::invalid_argument("perturb_policy: eta must be >= 0");
    std::vector<int> out(pi.size());
    for (std::size_t s = 0; s < pi.size(); ++s) {
        const double base = mdp.actions[pi[s]];
        std::vector<int> candidates;
        for (int a = 0; a < mdp.num_actions(); ++a) {
            if (std::abs(mdp.actions[a] - base) < eta) candidates.push_back(a);
        }
        if (candidates.empty()) {
            out[s] = pi[s];
        } else if (directional) {
            // farthest admissible action in a per-state seeded direction
            const bool up = rng.uniform() < 0.5;
            int pick = pi[s];
            for (int a : candidates) {
                if (up && a > pick) pick = a;
                if (!up && a < pick) pick = a;
            }
            out[s] = pick;
        } else {
            out[s] = candidates[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
        }
    }
    return out;
}

LipschitzCertificate estimate_lipschitz(const TabularMdp& mdp) {
    LipschitzCertificate cert;
    for (int a = 0; a + 1 < mdp.num_actions(); ++a) {
        const double da = mdp.actions[a + 1] - mdp.actions[a];
        if (da <= 0.0) throw std::invalid_argument("estimate_lipschitz: non-increasing grid");
        for (int s = 0; s < mdp.num_states; ++s) {
            cert.L_R = std::max(cert.L_R, std::abs(mdp.R(s, a + 1) - mdp.R(s, a)) / da);
            const double dp = (mdp.P[a + 1].row(s) - mdp.P[a].row(s)).cwiseAbs().sum();
            cert.L_P = std::max(cert.L_P, dp / da);
        }
    }
    return cert;
}

std::vector<int> identity_mapping(int n) {
    std::vector<int> f(n);
    std::iota(f.begin(), f.end(), 0);
    return f;
}

std::vector<int> random_bijection(int n, Rng& rng) {
    std::vector<int> f = identity_mapping(n);
    for (int i = n - 1; i > 0; --i) {
        std::swap(f[i], f[rng.uniform_int(0, i)]);
    }
    return f;
}

BoundReport check_bound(const TabularMdp& mdp, const BoundCheckOptions& opt, Rng& rng) {
    const Vec V_star = value_iteration(mdp);
    const Vec V1 = opt.adversarial_value ? perturb_value_adversarial(V_star, opt.eps)
                                         : perturb_value(V_star, opt.eps, rng);
    const std::vector<int> pi1 = greedy_policy(mdp, V1);
    std::vector<int> pi2 = perturb_policy(mdp, pi1, opt.eta, rng, opt.directional_policy);

    // An invertible state relabeling is value-preserving: the phase-2 policy
    // stored over f(S) and queried through f executes the same action map.
    if (opt.relabel_states) {
        const std::vector<int> f = random_bijection(mdp.num_states, rng);
        std::vector<int> pi2_prime(mdp.num_states);
        for (int s = 0; s < mdp.num_states; ++s) pi2_prime[f[s]] = pi2[s];
        std::vector<int> executed(mdp.num_states);
        for (int s = 0; s < mdp.num_states; ++s) executed[s] = pi2_prime[f[s]];
        pi2 = executed;
    }
    const Vec V_pi2 = policy_evaluation(mdp, pi2);

    const LipschitzCertificate cert = estimate_lipschitz(mdp);
    BoundReport rep;
    rep.eps = opt.eps;
    rep.eta = opt.eta;
    rep.gamma = mdp.gamma;
    rep.L_R = cert.L_R;
    rep.L_P = cert.L_P;
    rep.c = cert.L_R + mdp.gamma * cert.L_P * V_star.sum();
    rep.lhs = (V_star - V_pi2).maxCoeff();
    rep.rhs = (2.0 * rep.eps * mdp.gamma + rep.eta * rep.c) / (1.0 - mdp.gamma);
    rep.holds = rep.lhs <= rep.rhs + 1e-9;
    return rep;
}

EnsembleResult run_ensemble(const EnsembleConfig& cfg) {
    EnsembleResult result;
    result.min_slack = std::numeric_limits<double>::infinity();
    result.max_slack = -std::numeric_limits<double>::infinity();
    result.min_rhs_over_lhs = std::numeric_limits<double>::infinity();
    Rng master(cfg.seed);
    for (int i = 0; i < cfg.instances; ++i) {
        Rng inst_rng = master.derive(static_cast<std::uint64_t>(i));
        GeneratorConfig gen;
        gen.num_states = cfg.state_counts[i % cfg.state_counts.size()];
        gen.num_actions = cfg.action_counts[(i / cfg.state_counts.size()) % cfg.action_counts.size()];
        gen.gamma = cfg.gammas[i % cfg.gammas.size()];
        TabularMdp mdp = generate_lipschitz_mdp(gen, inst_rng.next_u64());
        for (double eps : cfg.eps_grid) {
            for (double eta : cfg.eta_grid) {
                BoundCheckOptions opt;
                opt.eps = eps;
                opt.eta = eta;
                BoundReport rep = check_bound(mdp, opt, inst_rng);
                if (!rep.holds) {
                    ++result.violations;
                    if (result.counterexample_json.empty()) {
                        result.counterexample_json = mdp_to_json(mdp);
                    }
                }
                result.min_slack = std::min(result.min_slack, rep.slack());
                result.max_slack = std::max(result.max_slack, rep.slack());
                if (rep.lhs > 1e-12) {
                    result.min_rhs_over_lhs = std::min(result.min_rhs_over_lhs, rep.rhs / rep.lhs);
                }
                result.reports.push_back(rep);
            }
        }
    }
    return result;
}

std::string mdp_to_json(const TabularMdp& mdp) {
    nlohmann::json j;
    j["num_states"] = mdp.num_states;
    j["actions"] = mdp.actions;
    j["gamma"] = mdp.gamma;
    std::vector<std::vector<double>> R;
    for (int s = 0; s < mdp.num_states; ++s) {
        std::vector<double> row(mdp.num_actions());
        for (int a = 0; a < mdp.num_actions(); ++a) row[a] = mdp.R(s, a);
        R.push_back(std::move(row));
    }
    j["R"] = R;
    std::vector<std::vector<std::vector<double>>> P;
    for (int a = 0; a < mdp.num_actions(); ++a) {
        std::vector<std::vector<double>> pa;
        for (int s = 0; s < mdp.num_states; ++s) {
            std::vector<double> row(mdp.num_states);
            for (int s2 = 0; s2 < mdp.num_states; ++s2) row[s2] = mdp.P[a](s, s2);
            pa.push_back(row);
        }
        P.push_back(pa);
    }
    j["P"] = P;
    return j.dump();
}

void write_ensemble_report(const EnsembleResult& result, const EnsembleConfig& cfg,
                           const std::string& path) {
    nlohmann::json j;
    j["instances"] = cfg.instances;
    j["eps_grid"] = cfg.eps_grid;
    j["eta_grid"] = cfg.eta_grid;
    j["gammas"] = cfg.gammas;
    j["seed"] = cfg.seed;
    j["violations"] = result.violations;
    j["min_slack"] = result.min_slack;
    j["max_slack"] = result.max_slack;
    j["min_rhs_over_lhs"] = result.min_rhs_over_lhs;
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& r : result.reports) {
        reports.push_back({{"eps", r.eps},
                           {"eta", r.eta},
                           {"gamma", r.gamma},
                           {"L_R", r.L_R},
                           {"L_P", r.L_P},
                           {"c", r.c},
                           {"lhs", r.lhs},
                           {"rhs", r.rhs},
                           {"slack", r.slack()},
                           {"holds", r.holds}});
    }
    j["reports"] = std::move(reports);
    if (!result.counterexample_json.empty()) {
        j["counterexample"] = nlohmann::json::parse(result.counterexample_json);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_ensemble_report: cannot write " + path);
    out << j.dump(2);
}

}  // namespace visloco::mdp

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "visloco/mdp.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace visloco;
using namespace visloco::mdp;

namespace {

TabularMdp single_state(double gamma, double reward) {
    TabularMdp m;
    m.num_states = 1;
    m.actions = {0.0};
    m.P = {Mat::Ones(1, 1)};
    m.R = Mat::Constant(1, 1, reward);
    m.gamma = gamma;
    return m;
}

// Two-state deterministic chain: state 0 hops to 1, state 1 self-loops.
TabularMdp two_state_chain(double gamma) {
    TabularMdp m;
    m.num_states = 2;
    m.actions = {0.0};
    Mat P(2, 2);
    P << 0.0, 1.0, 0.0, 1.0;
    m.P = {P};
    m.R = Mat(2, 1);
    m.R << 1.0, 2.0;
    m.gamma = gamma;
    return m;
}

}  // namespace

TEST_CASE("value iteration: single state geometric series") {
    const double gamma = 0.9;
    Vec V = value_iteration(single_state(gamma, 1.0));
    CHECK(V[0] == doctest::Approx(1.0 / (1.0 - gamma)).epsilon(1e-9));
}

TEST_CASE("value iteration: two-state chain matches the hand computation") {
    const double gamma = 0.8;
    Vec V = value_iteration(two_state_chain(gamma));
    const double v1 = 2.0 / (1.0 - gamma);
    const double v0 = 1.0 + gamma * v1;
    CHECK(V[1] == doctest::Approx(v1).epsilon(1e-9));
    CHECK(V[0] == doctest::Approx(v0).epsilon(1e-9));
}

TEST_CASE("value iteration: zero rewards give zero values") {
    GeneratorConfig cfg;
    TabularMdp m = generate_lipschitz_mdp(cfg, 3);
    m.R.setZero();
    Vec V = value_iteration(m);
    CHECK(V.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("value iteration rejects a non-stochastic transition tensor") {
    TabularMdp m = single_state(0.9, 1.0);
    m.P[0](0, 0) = 0.5;
    CHECK_THROWS_AS((void)value_iteration(m), std::invalid_argument);
}

TEST_CASE("greedy on V=0 is myopic") {
    GeneratorConfig cfg;
    cfg.num_states = 6;
    cfg.num_actions = 9;
    TabularMdp m = generate_lipschitz_mdp(cfg, 11);
    auto pi = greedy_policy(m, Vec::Zero(6));
    for (int s = 0; s < 6; ++s) {
        int best = 0;
        for (int a = 1; a < 9; ++a) {
            if (m.R(s, a) > m.R(s, best)) best = a;
        }
        CHECK(pi[s] == best);
    }
}

TEST_CASE("greedy tie-break picks the smaller action index") {
    TabularMdp m;
    m.num_states = 1;
    m.actions = {0.0, 0.5, 1.0};
    m.P = {Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1)};
    m.R = Mat(1, 3);
    m.R << 1.0, 1.0, 0.5;  // tie between actions 0 and 1
    m.gamma = 0.9;
    auto pi = greedy_policy(m, Vec::Zero(1));
    CHECK(pi[0] == 0);
}

TEST_CASE("greedy from exact V* is optimal") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GeneratorConfig cfg;
        cfg.num_states = 8;
        cfg.num_actions = 7;
        cfg.gamma = 0.95;
        TabularMdp m = generate_lipschitz_mdp(cfg, seed);
        Vec V_star = value_iteration(m);
        auto pi = greedy_policy(m, V_star);
        Vec V_pi = policy_evaluation(m, pi);
        CHECK((V_star - V_pi).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("policy evaluation: hand case and zero rewards") {
    TabularMdp m = two_state_chain(0.8);
    Vec V = policy_evaluation(m, {0, 0});
    CHECK(V[1] == doctest::Approx(2.0 / 0.2));
    CHECK(V[0] == doctest::Approx(1.0 + 0.8 * 10.0));
    m.R.setZero();
    Vec Z = policy_evaluation(m, {0, 0});
    CHECK(Z.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("perturb_value: eps 0 is exact; sup distance stays below eps") {
    Vec V(4);
    V << 1.0, 2.0, 3.0, 4.0;
    Rng rng(5);
    Vec same = perturb_value(V, 0.0, rng);
    CHECK((same - V).cwiseAbs().maxCoeff() == 0.0);
    for (int k = 0; k < 1000; ++k) {
        Vec p = perturb_value(V, 0.05, rng);
        CHECK((p - V).cwiseAbs().maxCoeff() < 0.05);
    }
    Vec adv = perturb_value_adversarial(V, 0.05);
    CHECK((adv - V).cwiseAbs().maxCoeff() < 0.05);
    CHECK((adv - V).cwiseAbs().minCoeff() > 0.049);
    CHECK((adv[0] - V[0]) * (adv[1] - V[1]) < 0.0);  // alternating signs
}

TEST_CASE("perturb_policy: eta 0 identical, small eta below spacing identical") {
    GeneratorConfig cfg;
    cfg.num_actions = 11;  // spacing 0.1
    TabularMdp m = generate_lipschitz_mdp(cfg, 2);
    Vec V = value_iteration(m);
    auto pi = greedy_policy(m, V);
    Rng rng(3);
    CHECK(perturb_policy(m, pi, 0.0, rng) == pi);
    CHECK(perturb_policy(m, pi, 0.05, rng) == pi);
}

TEST_CASE("perturb_policy: eta 0.2 on spacing 0.1 moves at most 2 cells") {
    GeneratorConfig cfg;
    cfg.num_actions = 11;
    TabularMdp m = generate_lipschitz_mdp(cfg, 4);
    Vec V = value_iteration(m);
    auto pi = greedy_policy(m, V);
    Rng rng(6);
    for (int k = 0; k < 100; ++k) {
        auto pi2 = perturb_policy(m, pi, 0.2, rng);
        for (std::size_t s = 0; s < pi.size(); ++s) {
            CHECK(std::abs(pi2[s] - pi[s]) <= 2);
            CHECK(std::abs(m.actions[pi2[s]] - m.actions[pi[s]]) < 0.2);
        }
    }
}

TEST_CASE("state relabeling composes back to the same action map") {
    Rng rng(9);
    const int n = 12;
    auto f = random_bijection(n, rng);
    std::vector<int> seen(n, 0);
    for (int v : f) seen[v] += 1;
    for (int c : seen) CHECK(c == 1);  // bijection
    std::vector<int> pi2(n);
    for (int s = 0; s < n; ++s) pi2[s] = s % 3;
    std::vector<int> stored(n);
    for (int s = 0; s < n; ++s) stored[f[s]] = pi2[s];
    for (int s = 0; s < n; ++s) CHECK(stored[f[s]] == pi2[s]);
}

TEST_CASE("lipschitz: constant-in-action rewards give L_R = 0") {
    TabularMdp m;
    m.num_states = 2;
    m.actions = {0.0, 0.5, 1.0};
    m.P.assign(3, (Mat(2, 2) << 0.5, 0.5, 0.5, 0.5).finished());
    m.R = Mat::Constant(2, 3, 1.0);
    m.gamma = 0.9;
    auto cert = estimate_lipschitz(m);
    CHECK(cert.L_R == 0.0);
    CHECK(cert.L_P == 0.0);
}

TEST_CASE("lipschitz: R(s,a)=a gives L_R = 1") {
    TabularMdp m;
    m.num_states = 1;
    m.actions = {0.0, 0.25, 0.5, 0.75, 1.0};
    m.P.assign(5, Mat::Ones(1, 1));
    m.R = Mat(1, 5);
    for (int a = 0; a < 5; ++a) m.R(0, a) = m.actions[a];
    m.gamma = 0.9;
    auto cert = estimate_lipschitz(m);
    CHECK(cert.L_R == doctest::Approx(1.0));
}

TEST_CASE("lipschitz certificate dominates every sampled pairwise ratio") {
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
        GeneratorConfig cfg;
        cfg.num_states = 6;
        cfg.num_actions = 13;
        TabularMdp m = generate_lipschitz_mdp(cfg, seed);
        auto cert = estimate_lipschitz(m);
        for (int a = 0; a < m.num_actions(); ++a) {
            for (int b = a + 1; b < m.num_actions(); ++b) {
                const double da = m.actions[b] - m.actions[a];
                for (int s = 0; s < m.num_states; ++s) {
                    CHECK(std::abs(m.R(s, b) - m.R(s, a)) / da <= cert.L_R + 1e-12);
                    const double dp = (m.P[b].row(s) - m.P[a].row(s)).cwiseAbs().sum();
                    CHECK(dp / da <= cert.L_P + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("check_bound: eps=0 eta=0 holds with equality") {
    GeneratorConfig cfg;
    TabularMdp m = generate_lipschitz_mdp(cfg, 1);
    Rng rng(1);
    BoundCheckOptions opt;
    BoundReport rep = check_bound(m, opt, rng);
    CHECK(rep.lhs < 1e-9);
    CHECK(rep.rhs == 0.0);
    CHECK(rep.holds);
}

TEST_CASE("check_bound: eta=0 sub-case also satisfies the classical bound") {
    Rng rng(17);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        GeneratorConfig cfg;
        cfg.num_states = 10;
        cfg.num_actions = 9;
        cfg.gamma = 0.9;
        TabularMdp m = generate_lipschitz_mdp(cfg, seed);
        for (double eps : {0.01, 0.1}) {
            BoundCheckOptions opt;
            opt.eps = eps;
            BoundReport rep = check_bound(m, opt, rng);
            CHECK(rep.holds);
            CHECK(rep.lhs <= 2.0 * eps * m.gamma / (1.0 - m.gamma) + 1e-9);
        }
    }
}

TEST_CASE("check_bound: relabeled state space gives the identical report") {
    GeneratorConfig cfg;
    TabularMdp m = generate_lipschitz_mdp(cfg, 8);
    BoundCheckOptions opt;
    opt.eps = 0.05;
    opt.eta = 0.1;
    Rng a(5), b(5);
    BoundReport plain = check_bound(m, opt, a);
    opt.relabel_states = true;
    BoundReport relabeled = check_bound(m, opt, b);
    CHECK(plain.lhs == doctest::Approx(relabeled.lhs).epsilon(1e-12));
    CHECK(plain.rhs == doctest::Approx(relabeled.rhs).epsilon(1e-12));
}

TEST_CASE("small ensemble: zero violations, adversarial and directional modes too") {
    Rng rng(100);
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        GeneratorConfig cfg;
        cfg.num_states = 8;
        cfg.num_actions = 11;
        cfg.gamma = seed % 2 == 0 ? 0.9 : 0.99;
        TabularMdp m = generate_lipschitz_mdp(cfg, seed);
        for (double eps : {0.0, 0.05}) {
            for (double eta : {0.0, 0.1}) {
                for (bool adv : {false, true}) {
                    BoundCheckOptions opt;
                    opt.eps = eps;
                    opt.eta = eta;
                    opt.adversarial_value = adv;
                    opt.directional_policy = adv;
                    BoundReport rep = check_bound(m, opt, rng);
                    CHECK(rep.holds);
                }
            }
        }
    }
}

TEST_CASE("monotone eta probe: directional lhs is non-decreasing in eta") {
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GeneratorConfig cfg;
        cfg.num_states = 8;
        cfg.num_actions = 21;  // fine grid so eta growth matters
        cfg.gamma = 0.9;
        TabularMdp m = generate_lipschitz_mdp(cfg, seed);
        double prev = -1.0;
        for (double eta : {0.0, 0.06, 0.11, 0.16, 0.21}) {
            // same seed stream per eta: the perturbation direction is fixed
            Rng rng(seed * 31 + 7);
            BoundCheckOptions opt;
            opt.eta = eta;
            opt.directional_policy = true;
            BoundReport rep = check_bound(m, opt, rng);
            CHECK(rep.lhs >= prev - 1e-9);
            prev = rep.lhs;
            ++checked;
        }
    }
    CHECK(checked == 50);
}

TEST_CASE("ensemble report file round-trips through JSON") {
    EnsembleConfig cfg;
    cfg.instances = 4;
    cfg.eps_grid = {0.0, 0.05};
    cfg.eta_grid = {0.0, 0.05};
    cfg.seed = 3;
    EnsembleResult res = run_ensemble(cfg);
    CHECK(res.violations == 0);
    CHECK(static_cast<int>(res.reports.size()) == 4 * 2 * 2);
    const auto path = (std::filesystem::temp_directory_path() / "visloco_bound.json").string();
    write_ensemble_report(res, cfg, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content.find("\"violations\": 0") != std::string::npos);
    std::remove(path.c_str());
}

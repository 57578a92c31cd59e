#include "visloco/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace visloco::eval {

std::vector<EvalResult> eval_policy(const ActFn& act, int hidden_dim, bool student_channels,
                                    const EnvConfig& env_cfg, const terrain::TerrainGrid& grid,
                                    const config::EvalSettings& settings, std::uint64_t seed,
                                    const std::string& policy_id) {
    std::vector<int> columns = settings.columns;
    if (columns.empty()) {
        columns.resize(static_cast<std::size_t>(grid.cols));
        std::iota(columns.begin(), columns.end(), 0);
    }
    EnvConfig cfg = env_cfg;
    cfg.episode_seconds = settings.episode_seconds;
    cfg.command_override = settings.command;

    std::vector<EvalResult> results;
    Rng seeder(seed);
    for (int r = 0; r < grid.rows(); ++r) {
        EvalResult res;
        res.kind = grid.row_kinds[static_cast<std::size_t>(r)];
        res.seed = seed;
        res.policy_id = policy_id;
        double disp = 0.0, ttf = 0.0;
        int successes = 0;
        for (int ep = 0; ep < settings.episodes_per_terrain; ++ep) {
            const int col = columns[static_cast<std::size_t>(ep) % columns.size()];
            Env env(cfg, seeder.derive(static_cast<std::uint64_t>(r * 10007 + ep)).seed());
            env.set_cell(&grid.at(r, col), res.kind, r, col);
            env.reset();
            Vec h = Vec::Zero(hidden_dim);
            bool fell = false;
            while (true) {
                const policy::PolicyObs o =
                    student_channels ? env.observe_student() : env.observe_teacher();
                const Vec a = act(o, h);
                const StepResult sr = env.step(a);
                if (sr.done) {
                    fell = sr.terminal;
                    break;
                }
            }
            disp += std::max(0.0, env.episode_distance());
            ttf += env.episode_time();
            const double goal = grid.at(r, col).x_end() - 0.3;
            if (!fell && env.state().x >= goal) ++successes;
            ++res.episodes;
        }
        res.mean_x_displacement = disp / res.episodes;
        res.mean_time_to_fall = ttf / res.episodes;
        res.success_rate = static_cast<double>(successes) / res.episodes;
        results.push_back(std::move(res));
    }
    return results;
}

void write_eval_csv(const std::string& path, const std::vector<EvalResult>& results) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_eval_csv: cannot write " + path);
    out << "terrain,episodes,mean_x_displacement,mean_time_to_fall,success_rate,seed,policy_id\n";
    out << std::setprecision(17);
    for (const auto& r : results) {
        out << terrain::kind_name(r.kind) << ',' << r.episodes << ',' << r.mean_x_displacement
            << ',' << r.mean_time_to_fall << ',' << r.success_rate << ',' << r.seed << ','
            << r.policy_id << "\n";
    }
}

std::vector<EvalResult> read_eval_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_eval_csv: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<EvalResult> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        EvalResult r;
        std::getline(ss, field, ',');
        r.kind = terrain::kind_from_name(field);
        std::getline(ss, field, ',');
        r.episodes = std::stoi(field);
        std::getline(ss, field, ',');
        r.mean_x_displacement = std::stod(field);
        std::getline(ss, field, ',');
        r.mean_time_to_fall = std::stod(field);
        std::getline(ss, field, ',');
        r.success_rate = std::stod(field);
        std::getline(ss, field, ',');
        r.seed = std::stoull(field);
        std::getline(ss, field, ',');
        r.policy_id = field;
        out.push_back(std::move(r));
    }
    return out;
}

std::string compare_methods(const std::vector<std::vector<EvalResult>>& methods) {
    if (methods.size() < 2) throw std::invalid_argument("compare_methods: need at least 2 methods");
    // identical terrain sets required
    std::vector<terrain::TerrainKind> terrains;
    for (const auto& r : methods.front()) terrains.push_back(r.kind);
    for (const auto& m : methods) {
        if (m.size() != terrains.size()) {
            throw std::invalid_argument("compare_methods: mismatched terrain sets");
        }
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i].kind != terrains[i]) {
                throw std::invalid_argument("compare_methods: mismatched terrain sets");
            }
        }
    }

    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "# Method comparison\n\n";
    os << "| Terrain |";
    for (const auto& m : methods) os << " " << m.front().policy_id << " disp (m) |";
    for (const auto& m : methods) os << " " << m.front().policy_id << " MTTF (s) |";
    os << "\n|---|";
    for (std::size_t k = 0; k < 2 * methods.size(); ++k) os << "---|";
    os << "\n";
    std::vector<double> disp_tot(methods.size(), 0.0), ttf_tot(methods.size(), 0.0);
    for (std::size_t i = 0; i < terrains.size(); ++i) {
        os << "| " << terrain::kind_name(terrains[i]) << " |";
        for (std::size_t m = 0; m < methods.size(); ++m) {
            os << " " << methods[m][i].mean_x_displacement << " |";
            disp_tot[m] += methods[m][i].mean_x_displacement;
        }
        for (std::size_t m = 0; m < methods.size(); ++m) {
            os << " " << methods[m][i].mean_time_to_fall << " |";
            ttf_tot[m] += methods[m][i].mean_time_to_fall;
        }
        os << "\n";
    }
    os << "| **Total** |";
    for (double v : disp_tot) os << " " << v << " |";
    for (double v : ttf_tot) os << " " << v << " |";
    os << "\n\n## Ranking (total displacement)\n\n";
    std::vector<std::size_t> order(methods.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return disp_tot[a] > disp_tot[b]; });
    int rank = 1;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0 && disp_tot[order[i]] < disp_tot[order[i - 1]]) rank = static_cast<int>(i) + 1;
        os << rank << ". " << methods[order[i]].front().policy_id << " (" << disp_tot[order[i]]
           << " m)\n";
    }
    return os.str();
}

}  // namespace visloco::eval

#include "visloco/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>

namespace visloco::terrain {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27; x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

// Lattice value in [-1, 1], random-access in (seed, octave, index).
double lattice_value(std::uint64_t seed, int octave, std::int64_t k) {
    std::uint64_t h = mix64(seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(octave + 1) +
                            0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(k + (1LL << 32)));
    return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

int sample_index(const TerrainConfig& cfg, double x) {
    return static_cast<int>(std::lround(x / cfg.dx));
}

}  // namespace

const char* kind_name(TerrainKind kind) {
    switch (kind) {
        case TerrainKind::Flat: return "flat";
        case TerrainKind::Slope: return "slope";
        case TerrainKind::StairsUp: return "stairs_up";
        case TerrainKind::StairsDown: return "stairs_down";
        case TerrainKind::DiscreteObstacles: return "discrete_obstacles";
        case TerrainKind::Gaps: return "gaps";
        case TerrainKind::SteppingStones: return "stepping_stones";
    }
    return "unknown";
}

TerrainKind kind_from_name(const std::string& name) {
    for (int i = 0; i < kNumTerrainKinds; ++i) {
        auto k = static_cast<TerrainKind>(i);
        if (name == kind_name(k)) return k;
    }
    throw std::invalid_argument("unknown terrain kind: " + name);
}

double difficulty_param(TerrainKind kind, double difficulty) {
    if (difficulty < 0.0 || difficulty > 1.0) {
        throw std::invalid_argument("difficulty must be in [0, 1]");
    }
    switch (kind) {
        case TerrainKind::Flat: return 0.0;
        case TerrainKind::Slope: return lerp(0.0, 0.4, difficulty);             // grade
        case TerrainKind::StairsUp:
        case TerrainKind::StairsDown: return lerp(0.05, 0.25, difficulty);      // rise, m
        case TerrainKind::DiscreteObstacles: return lerp(0.05, 0.26, difficulty);  // height, m
        case TerrainKind::Gaps: return lerp(0.05, 0.30, difficulty);            // width, m
        case TerrainKind::SteppingStones: return lerp(0.05, 0.25, difficulty);  // gap, m
    }
    return 0.0;
}

Heightfield generate_terrain(TerrainKind kind, double difficulty, std::uint64_t seed,
                             const TerrainConfig& cfg) {
    const double param = difficulty_param(kind, difficulty);
    const int n = static_cast<int>(std::lround(cfg.length / cfg.dx)) + 1;
    Heightfield hf;
    hf.dx = cfg.dx;
    hf.x0 = 0.0;
    hf.samples.assign(static_cast<std::size_t>(n), 0.0);

    Rng rng(mix64(seed + static_cast<std::uint64_t>(kind) * 0x9E3779B97F4A7C15ULL));
    const double body_start = cfg.spawn_pad;
    const double body_end = cfg.length - cfg.end_pad;

    auto x_of = [&cfg](int i) { return static_cast<double>(i) * cfg.dx; };

    switch (kind) {
        case TerrainKind::Flat:
            break;
        case TerrainKind::Slope: {
            for (int i = 0; i < n; ++i) {
                const double x = x_of(i);
                if (x <= body_start) continue;
                hf.samples[i] = param * (std::min(x, body_end) - body_start);
            }
            break;
        }
        case TerrainKind::StairsUp:
        case TerrainKind::StairsDown: {
            const double sign = kind == TerrainKind::StairsUp ? 1.0 : -1.0;
            for (int i = 0; i < n; ++i) {
                const double x = x_of(i);
                if (x < body_start) continue;
                const double prog = std::min(x, body_end) - body_start;
                const double step = std::floor(prog / cfg.stair_run) + 1.0;
                hf.samples[i] = sign * param * step;
            }
            break;
        }
        case TerrainKind::DiscreteObstacles: {
            const double span = (body_end - body_start) / cfg.obstacle_count;
            for (int k = 0; k < cfg.obstacle_count; ++k) {
                const double len = rng.uniform(0.4, 0.8);
                const double slot0 = body_start + k * span;
                const double start = slot0 + rng.uniform(0.0, std::max(0.0, span - len));
                const int i0 = std::max(0, sample_index(cfg, start));
                const int i1 = std::min(n - 1, sample_index(cfg, start + len));
                for (int i = i0; i <= i1; ++i) hf.samples[i] = param;
            }
            break;
        }
        case TerrainKind::Gaps: {
            const double span = (body_end - body_start) / cfg.gap_count;
            const int width_samples = std::max(1, static_cast<int>(std::lround(param / cfg.dx)));
            for (int k = 0; k < cfg.gap_count; ++k) {
                const double slot0 = body_start + k * span + 0.25 * span;
                const double start = slot0 + rng.uniform(0.0, 0.5 * span - param);
                const int i0 = sample_index(cfg, start);
                for (int i = i0; i < i0 + width_samples && i < n; ++i) {
                    hf.samples[i] = kGapDepth;
                }
            }
            break;
        }
        case TerrainKind::SteppingStones: {
            const int gap_samples = std::max(1, static_cast<int>(std::lround(param / cfg.dx)));
            const int stone_samples = std::max(1, static_cast<int>(std::lround(cfg.stone_length / cfg.dx)));
            int i = sample_index(cfg, body_start) + stone_samples;  // lead with a stone
            const int last = sample_index(cfg, body_end);
            while (i + gap_samples <= last) {
                for (int j = i; j < i + gap_samples; ++j) hf.samples[j] = kGapDepth;
                i += gap_samples + stone_samples;
            }
            break;
        }
    }
    return hf;
}

Heightfield add_fractal(const Heightfield& hf, double amplitude, std::uint64_t seed) {
    if (amplitude < 0.0) throw std::invalid_argument("add_fractal: amplitude must be >= 0");
    Heightfield out = hf;
    if (amplitude == 0.0) return out;

    constexpr int kOctaves = 4;
    constexpr double kPersistence = 0.5;
    constexpr double kBaseWavelength = 1.6;  // meters
    double norm = 0.0;
    for (int o = 0; o < kOctaves; ++o) norm += std::pow(kPersistence, o);

    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        if (out.samples[i] <= kGapDepth + 0.5) continue;  // keep gap interiors at the sentinel
        const double x = static_cast<double>(i) * hf.dx;
        double acc = 0.0;
        for (int o = 0; o < kOctaves; ++o) {
            const double wavelength = kBaseWavelength / static_cast<double>(1 << o);
            const double u = x / wavelength;
            const auto k = static_cast<std::int64_t>(std::floor(u));
            const double t = u - static_cast<double>(k);
            const double s = t * t * (3.0 - 2.0 * t);
            const double v = lerp(lattice_value(seed, o, k), lattice_value(seed, o, k + 1), s);
            acc += std::pow(kPersistence, o) * v;
        }
        out.samples[i] += amplitude * acc / norm;
    }
    return out;
}

double height_at(const Heightfield& hf, double x) {
    bool ignored;
    return height_at(hf, x, &ignored);
}

double height_at(const Heightfield& hf, double x, bool* out_of_bounds) {
    const double rel = (x - hf.x0) / hf.dx;
    const auto n = static_cast<double>(hf.samples.size() - 1);
    *out_of_bounds = rel < 0.0 || rel > n;
    const double c = std::clamp(rel, 0.0, n);
    const auto i = static_cast<std::size_t>(std::floor(c));
    if (i >= hf.samples.size() - 1) return hf.samples.back();
    const double t = c - static_cast<double>(i);
    return lerp(hf.samples[i], hf.samples[i + 1], t);
}

double slope_at(const Heightfield& hf, double x) {
    const double h = hf.dx;
    return (height_at(hf, x + 0.5 * h) - height_at(hf, x - 0.5 * h)) / h;
}

TerrainGrid build_grid(const GridConfig& cfg, std::uint64_t seed) {
    if (cfg.kinds.empty()) throw std::invalid_argument("build_grid: no rows");
    if (cfg.cols < 1) throw std::invalid_argument("build_grid: cols must be >= 1");
    TerrainGrid grid;
    grid.row_kinds = cfg.kinds;
    grid.cols = cfg.cols;
    grid.cells.resize(cfg.kinds.size());
    Rng master(seed);
    for (std::size_t r = 0; r < cfg.kinds.size(); ++r) {
        grid.cells[r].reserve(cfg.cols);
        for (int c = 0; c < cfg.cols; ++c) {
            const double difficulty =
                cfg.cols > 1 ? static_cast<double>(c) / static_cast<double>(cfg.cols - 1) : 0.0;
            Rng cell_rng = master.derive(r * 1000 + static_cast<std::uint64_t>(c));
            Heightfield hf =
                generate_terrain(cfg.kinds[r], difficulty, cell_rng.next_u64(), cfg.terrain);
            if (cfg.apply_fractal) {
                const double amp = cfg.kinds[r] == TerrainKind::Flat
                                       ? cfg.flat_fractal
                                       : cell_rng.uniform(cfg.rough_fractal_lo, cfg.rough_fractal_hi);
                hf = add_fractal(hf, amp, cell_rng.next_u64());
            }
            grid.cells[r].push_back(std::move(hf));
        }
    }
    return grid;
}

TerrainGrid build_grid(int rows, int cols, std::uint64_t seed) {
    if (rows < 1 || rows > kNumTerrainKinds) {
        throw std::invalid_argument("build_grid: rows must be in [1, kind count]");
    }
    GridConfig cfg;
    for (int r = 0; r < rows; ++r) cfg.kinds.push_back(static_cast<TerrainKind>(r));
    cfg.cols = cols;
    return build_grid(cfg, seed);
}

std::vector<std::pair<int, int>> gap_intervals(const Heightfield& hf) {
    std::vector<std::pair<int, int>> out;
    const int n = static_cast<int>(hf.samples.size());
    int i = 0;
    while (i < n) {
        if (hf.samples[i] <= kGapDepth + 0.5) {
            int j = i;
            while (j < n && hf.samples[j] <= kGapDepth + 0.5) ++j;
            out.emplace_back(i, j);
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

void save_csv(const Heightfield& hf, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot write " + path);
    out << "x,height\n" << std::setprecision(17);
    for (std::size_t i = 0; i < hf.samples.size(); ++i) {
        out << hf.x0 + static_cast<double>(i) * hf.dx << "," << hf.samples[i] << "\n";
    }
}

Heightfield load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    Heightfield hf;
    std::vector<double> xs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        xs.push_back(std::stod(line.substr(0, comma)));
        hf.samples.push_back(std::stod(line.substr(comma + 1)));
    }
    if (xs.size() < 2) throw std::runtime_error("load_csv: too few samples");
    hf.x0 = xs.front();
    hf.dx = xs[1] - xs[0];
    return hf;
}

void save_binary(const Heightfield& hf, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_binary: cannot write " + path);
    const char magic[4] = {'V', 'L', 'H', 'F'};
    out.write(magic, 4);
    const auto n = static_cast<std::int64_t>(hf.samples.size());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&hf.dx), sizeof(hf.dx));
    out.write(reinterpret_cast<const char*>(&hf.x0), sizeof(hf.x0));
    out.write(reinterpret_cast<const char*>(hf.samples.data()),
              static_cast<std::streamsize>(hf.samples.size() * sizeof(double)));
}

Heightfield load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_binary: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "VLHF", 4) != 0) throw std::runtime_error("load_binary: bad magic");
    std::int64_t n = 0;
    Heightfield hf;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    in.read(reinterpret_cast<char*>(&hf.dx), sizeof(hf.dx));
    in.read(reinterpret_cast<char*>(&hf.x0), sizeof(hf.x0));
    hf.samples.resize(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(hf.samples.data()),
            static_cast<std::streamsize>(hf.samples.size() * sizeof(double)));
    if (!in) throw std::runtime_error("load_binary: truncated file");
    return hf;
}

}  // namespace visloco::terrain

#pragma once

#include "visloco/common.hpp"

#include <string>
#include <vector>

namespace visloco::terrain {

// Sentinel depth for gap interiors: a foot entering a gap finds support a
// meter down and the episode registers a fall through normal contact logic.
constexpr double kGapDepth = -1.0;

struct Heightfield {
    std::vector<double> samples;  // meters
    double dx = 0.02;             // sample spacing, meters
    double x0 = 0.0;              // origin, meters

    double length() const { return dx * static_cast<double>(samples.size() - 1); }
    double x_end() const { return x0 + length(); }
};

enum class TerrainKind {
    Flat,
    Slope,
    StairsUp,
    StairsDown,
    DiscreteObstacles,
    Gaps,
    SteppingStones,
};

constexpr int kNumTerrainKinds = 7;

const char* kind_name(TerrainKind kind);
TerrainKind kind_from_name(const std::string& name);

struct TerrainConfig {
    double length = 8.0;       // meters per sub-terrain
    double dx = 0.02;
    double spawn_pad = 1.0;    // flat lead-in, meters
    double end_pad = 0.5;
    double stair_run = 0.28;
    double stone_length = 0.25;
    int gap_count = 4;
    int obstacle_count = 6;
};

// Difficulty mapping for the geometric parameter that governs each kind.
double difficulty_param(TerrainKind kind, double difficulty);

// Deterministic in (kind, difficulty, seed). No fractal overlay.
Heightfield generate_terrain(TerrainKind kind, double difficulty, std::uint64_t seed,
                             const TerrainConfig& cfg = {});

// Adds multi-octave seeded value noise; the perturbation magnitude never
// exceeds `amplitude`. Zero amplitude returns the input unchanged.
Heightfield add_fractal(const Heightfield& hf, double amplitude, std::uint64_t seed);

// Linear interpolation between adjacent samples; x outside the field clamps.
double height_at(const Heightfield& hf, double x);
double height_at(const Heightfield& hf, double x, bool* out_of_bounds);

// Finite-difference surface slope at x (used for contact normals).
double slope_at(const Heightfield& hf, double x);

struct GridConfig {
    std::vector<TerrainKind> kinds;  // one per row
    int cols = 10;
    TerrainConfig terrain;
    bool apply_fractal = true;
    double flat_fractal = 0.10;       // high fractal on flat rows
    double rough_fractal_lo = 0.02;   // range drawn per non-flat cell
    double rough_fractal_hi = 0.04;
};

struct TerrainGrid {
    std::vector<TerrainKind> row_kinds;
    int cols = 0;
    std::vector<std::vector<Heightfield>> cells;  // [row][col]

    int rows() const { return static_cast<int>(row_kinds.size()); }
    const Heightfield& at(int row, int col) const { return cells.at(row).at(col); }
    double difficulty_of_col(int col) const {
        return cols > 1 ? static_cast<double>(col) / static_cast<double>(cols - 1) : 0.0;
    }
};

// Row r uses kinds[r]; column difficulty ramps 0 -> 1 left to right.
TerrainGrid build_grid(const GridConfig& cfg, std::uint64_t seed);

// Convenience: first `rows` kinds in enum order.
TerrainGrid build_grid(int rows, int cols, std::uint64_t seed);

// Gap/stone support scan used by tests and the stepping-stone generator:
// returns [start,end) sample index ranges whose height is at the gap depth.
std::vector<std::pair<int, int>> gap_intervals(const Heightfield& hf);

void save_csv(const Heightfield& hf, const std::string& path);
Heightfield load_csv(const std::string& path);
void save_binary(const Heightfield& hf, const std::string& path);
Heightfield load_binary(const std::string& path);

}  // namespace visloco::terrain

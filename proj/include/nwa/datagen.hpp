#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nwa/grid.hpp"
#include "nwa/nn/tensor.hpp"

namespace nwa::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when rejection sampling cannot place endpoints on a map.
class UnusableMapError : public DataError {
 public:
  using DataError::DataError;
};

/// RGB image, row-major HWC, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;

  float at(int r, int c, int ch) const { return rgb[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
  /// (3, H, W) double tensor for the encoders.
  nn::Tensor to_tensor() const;
};

struct Terrain {
  std::string name;
  double cost = 1.0;
  bool wall = false;
  std::vector<float> texture;  // tile x tile x 3
};

struct Tileset {
  int tile = 8;
  std::vector<Terrain> terrains;

  std::vector<double> costs() const;
};

/// Warcraft-like set: `count` terrains with one texture per cost. With five
/// terrains the costs are {1, 2.5, 4, 7, 10}; otherwise evenly spread on [1, 10].
Tileset easy_tileset(int tile, int count = 5);

/// Pokemon-like set: ten cost classes on [1, 25], pairs of terrains sharing
/// near-identical textures at different costs, and cost-25 walls.
Tileset hard_tileset(int tile);

struct TileMap {
  Image image;
  CostField costs;
};

/// Clustered terrain layout from smoothed seeded noise, rendered with jittered
/// tile textures. Pure function of its arguments.
TileMap generate_map(std::uint64_t seed, Shape grid, const Tileset& tileset);

// ---------------------------------------------------------------------------
// Endpoint sampling.
// ---------------------------------------------------------------------------

enum class SamplingKind { MarginOppositeQuadrant, MinStepsAvoidWalls };

struct SamplingRule {
  SamplingKind kind = SamplingKind::MarginOppositeQuadrant;
  int margin = 3;
  int min_steps = 12;
  double wall_cost = 25.0;

  /// Human-readable identifier, e.g. "margin_opposite_quadrant(margin=3)".
  std::string id() const;
};

/// True when (source, target) satisfies `rule` on `costs`.
bool satisfies_rule(const SamplingRule& rule, const CostField& costs, Cell source, Cell target);

inline constexpr int kAttemptBudget = 1000;

/// Uniform over cells within `margin` cells of some grid edge.
Cell sample_target_margin(Shape grid, int margin, std::mt19937_64& rng);

/// Uniform over the quadrant diagonally opposite to the target's.
Cell sample_source_opposite_quadrant(Cell target, Shape grid, std::mt19937_64& rng);

/// 8-connected step counts from `from`, walking only on cells whose cost is
/// below `wall_cost`. Unreachable cells hold -1.
Field<int> bfs_steps(const CostField& costs, double wall_cost, Cell from);

/// Target and source off walls, separated by >= min_steps BFS steps.
std::pair<Cell, Cell> sample_pair_min_steps(const CostField& costs, double wall_cost, int min_steps,
                                            std::mt19937_64& rng);

/// Source for an existing target under `rule` (random-source metrics).
Cell resample_source(const SamplingRule& rule, const CostField& costs, Cell target, std::mt19937_64& rng);

/// Dijkstra-optimal path mask under the ground-truth costs.
Mask label_gt_path(const CostField& costs, Cell source, Cell target);

// ---------------------------------------------------------------------------
// Datasets.
// ---------------------------------------------------------------------------

struct Sample {
  int map_id = 0;
  Cell source;
  Cell target;
  Mask gt_path;
};

/// Self-contained training example: image + costs (shared), endpoints, label.
struct MapSample {
  std::shared_ptr<const TileMap> map;
  Cell source;
  Cell target;
  Mask gt_path;

  const Image& image() const { return map->image; }
  const CostField& gt_costs() const { return map->costs; }
};

struct Split {
  std::vector<std::shared_ptr<const TileMap>> maps;
  std::vector<Sample> samples;

  MapSample sample(std::size_t i) const;
  std::size_t size() const { return samples.size(); }
};

struct DatasetConfig {
  Shape grid{12, 12};
  int tile = 8;
  int terrains = 5;
  int n_train = 500;
  int n_val = 50;
  int n_test = 50;
  std::uint64_t seed = 0;
  bool hard = false;
  int margin = 3;
  int min_steps = 12;
  int targets_per_map = 2;
  int sources_per_target = 2;

  /// 20x20 grid, walls, min-steps sampling.
  static DatasetConfig hard_defaults();
};

struct FileEntry {
  std::string path;
  std::string dtype;
  std::vector<std::int64_t> shape;
  std::int64_t bytes = 0;
};

inline constexpr int kSchemaVersion = 1;

struct DatasetManifest {
  int schema_version = kSchemaVersion;
  DatasetConfig config;
  SamplingRule rule;
  std::vector<double> terrain_costs;
  std::vector<FileEntry> files;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

struct Dataset {
  DatasetManifest manifest;
  Split train;
  Split val;
  Split test;

  const Split& split(const std::string& name) const;
};

/// Pure function of the config (seed included).
Dataset generate_dataset(const DatasetConfig& config, int threads = 1);

/// Writes manifest.json plus raw little-endian arrays per split directory.
void save_dataset(const std::filesystem::path& dir, Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

/// Checks path validity and optimality; throws DataError naming `what`.
void verify_sample(const Split& split, std::size_t index, const std::string& what);

}  // namespace nwa::data

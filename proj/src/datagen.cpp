#include "nwa/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <numbers>
#include <numeric>

#include "nwa/io.hpp"
#include "nwa/parallel.hpp"
#include "nwa/search.hpp"

namespace nwa::data {
namespace {

static_assert(std::endian::native == std::endian::little, "raw dataset arrays assume a little-endian host");

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

int uniform_int(std::mt19937_64& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

enum class Pattern { Speckle, Stripes, Dots, Bricks, Waves };

std::vector<float> make_texture(int tile, const std::array<double, 3>& base, Pattern pattern,
                                double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  std::vector<float> tex(static_cast<std::size_t>(tile) * tile * 3);
  for (int y = 0; y < tile; ++y)
    for (int x = 0; x < tile; ++x) {
      double p = 0.0;
      switch (pattern) {
        case Pattern::Speckle: p = noise(rng); break;
        case Pattern::Stripes: p = std::sin(2.0 * std::numbers::pi * y / 4.0); break;
        case Pattern::Dots: p = ((x % 3 == 1) && (y % 3 == 1)) ? 1.0 : -0.3; break;
        case Pattern::Bricks: p = (y % 4 == 0 || (x + (y / 4) * 2) % 4 == 0) ? -1.0 : 0.4; break;
        case Pattern::Waves: p = std::sin(2.0 * std::numbers::pi * (x + y) / 5.0); break;
      }
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(base[ch] + amplitude * p, 0.0, 1.0);
        tex[(static_cast<std::size_t>(y) * tile + x) * 3 + ch] = static_cast<float>(v);
      }
    }
  return tex;
}

double as_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Smoothed uniform noise, two passes of a clamped 3x3 box filter.
Field<double> smooth_noise(Shape grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Field<double> f(grid.height, grid.width);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = u(rng);
  for (int pass = 0; pass < 2; ++pass) {
    Field<double> g(grid.height, grid.width);
    for (int r = 0; r < grid.height; ++r)
      for (int c = 0; c < grid.width; ++c) {
        double sum = f(r, c);
        int n = 1;
        for_each_neighbor({r, c}, grid, [&](Cell nb) {
          sum += f(nb.row, nb.col);
          ++n;
        });
        g(r, c) = sum / n;
      }
    f = std::move(g);
  }
  return f;
}

// Relative terrain frequencies.
std::vector<double> terrain_weights(const Tileset& tileset) {
  std::vector<double> w(tileset.terrains.size(), 1.0);
  if (tileset.terrains.size() == 5 && !tileset.terrains[0].wall) {
    w = {0.35, 0.2, 0.2, 0.12, 0.13};
  } else if (tileset.terrains.size() == 10) {
    w = {0.1, 0.1, 0.2, 0.1, 0.1, 0.08, 0.12, 0.06, 0.06, 0.08};
  }
  return w;
}

bool in_margin(Cell c, Shape grid, int margin) {
  return c.row < margin || c.row >= grid.height - margin || c.col < margin || c.col >= grid.width - margin;
}

bool in_opposite_quadrant(Cell source, Cell target, Shape grid) {
  const bool t_top = target.row < grid.height / 2;
  const bool t_left = target.col < grid.width / 2;
  const bool s_top = source.row < grid.height / 2;
  const bool s_left = source.col < grid.width / 2;
  return t_top != s_top && t_left != s_left;
}

bool is_wall(const CostField& costs, Cell c, double wall_cost) { return costs(c.row, c.col) >= wall_cost; }

Cell uniform_cell(Shape grid, std::mt19937_64& rng) {
  return {uniform_int(rng, 0, grid.height - 1), uniform_int(rng, 0, grid.width - 1)};
}

Cell sample_source_min_steps(const CostField& costs, const Field<int>& steps, double wall_cost,
                             int min_steps, std::mt19937_64& rng) {
  const Shape grid = shape_of(costs);
  for (int attempt = 0; attempt < kAttemptBudget; ++attempt) {
    const Cell s = uniform_cell(grid, rng);
    if (!is_wall(costs, s, wall_cost) && steps(s.row, s.col) >= min_steps) return s;
  }
  throw UnusableMapError("no source at >= " + std::to_string(min_steps) + " steps within " +
                         std::to_string(kAttemptBudget) + " attempts");
}

}  // namespace

nn::Tensor Image::to_tensor() const {
  nn::Tensor t({3, height, width});
  for (int ch = 0; ch < 3; ++ch) {
    auto plane = t.plane(ch);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) plane(r, c) = at(r, c, ch);
  }
  return t;
}

std::vector<double> Tileset::costs() const {
  std::vector<double> out;
  for (const Terrain& t : terrains) out.push_back(t.cost);
  return out;
}

Tileset easy_tileset(int tile, int count) {
  if (count < 2) throw std::invalid_argument("easy_tileset: need at least two terrains");
  Tileset ts{tile, {}};
  if (count == 5) {
    ts.terrains = {
        {"grass", 1.0, false, make_texture(tile, {0.30, 0.65, 0.25}, Pattern::Speckle, 0.10, 11)},
        {"earth", 2.5, false, make_texture(tile, {0.62, 0.46, 0.28}, Pattern::Stripes, 0.08, 12)},
        {"forest", 4.0, false, make_texture(tile, {0.10, 0.36, 0.14}, Pattern::Dots, 0.12, 13)},
        {"stone", 7.0, false, make_texture(tile, {0.56, 0.56, 0.60}, Pattern::Bricks, 0.10, 14)},
        {"water", 10.0, false, make_texture(tile, {0.16, 0.30, 0.78}, Pattern::Waves, 0.08, 15)},
    };
    return ts;
  }
  std::mt19937_64 rng(0xC0FFEE);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (int i = 0; i < count; ++i) {
    const double cost = as_f32(1.0 + 9.0 * i / (count - 1));
    const std::array<double, 3> base{u(rng), u(rng), u(rng)};
    ts.terrains.push_back({"terrain" + std::to_string(i), cost, false,
                           make_texture(tile, base, static_cast<Pattern>(i % 5), 0.1, 100 + i)});
  }
  return ts;
}

Tileset hard_tileset(int tile) {
  // Confuser pairs: (grass, tallgrass) and (shallows, deepwater) differ by a
  // small colour shift only.
  Tileset ts{tile, {}};
  ts.terrains = {
      {"sand", 1.0, false, make_texture(tile, {0.86, 0.80, 0.55}, Pattern::Speckle, 0.06, 21)},
      {"path", 1.5, false, make_texture(tile, {0.70, 0.62, 0.45}, Pattern::Stripes, 0.05, 22)},
      {"grass", 2.0, false, make_texture(tile, {0.35, 0.70, 0.30}, Pattern::Speckle, 0.10, 23)},
      {"shrub", 3.0, false, make_texture(tile, {0.30, 0.55, 0.25}, Pattern::Dots, 0.12, 24)},
      {"tallgrass", 4.5, false, make_texture(tile, {0.35, 0.66, 0.30}, Pattern::Speckle, 0.10, 23)},
      {"shallows", 6.0, false, make_texture(tile, {0.40, 0.60, 0.85}, Pattern::Waves, 0.08, 26)},
      {"forest", 8.0, false, make_texture(tile, {0.12, 0.35, 0.15}, Pattern::Dots, 0.10, 27)},
      {"rock", 10.0, false, make_texture(tile, {0.50, 0.48, 0.46}, Pattern::Bricks, 0.10, 28)},
      {"deepwater", 15.0, false, make_texture(tile, {0.40, 0.56, 0.85}, Pattern::Waves, 0.08, 26)},
      {"wall", 25.0, true, make_texture(tile, {0.25, 0.22, 0.22}, Pattern::Bricks, 0.15, 30)},
  };
  return ts;
}

TileMap generate_map(std::uint64_t seed, Shape grid, const Tileset& tileset) {
  if (tileset.terrains.size() < 2) throw std::invalid_argument("generate_map: tileset needs >= 2 terrains");
  std::mt19937_64 rng(seed);
  const std::vector<double> weights = terrain_weights(tileset);
  const double mean_w = std::accumulate(weights.begin(), weights.end(), 0.0) / weights.size();
  std::vector<Field<double>> fields;
  for (std::size_t k = 0; k < tileset.terrains.size(); ++k) fields.push_back(smooth_noise(grid, rng));

  const int tile = tileset.tile;
  TileMap map;
  map.costs = CostField(grid.height, grid.width);
  map.image = Image{grid.height * tile, grid.width * tile, {}};
  map.image.rgb.resize(static_cast<std::size_t>(map.image.height) * map.image.width * 3);
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  std::uniform_real_distribution<double> pixel_noise(-0.02, 0.02);
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c) {
      std::size_t best = 0;
      double best_score = -1e300;
      for (std::size_t k = 0; k < fields.size(); ++k) {
        const double score = fields[k](r, c) + 0.1 * std::log(weights[k] / mean_w);
        if (score > best_score) {
          best_score = score;
          best = k;
        }
      }
      const Terrain& terrain = tileset.terrains[best];
      map.costs(r, c) = as_f32(terrain.cost);
      const double shift = jitter(rng);
      for (int y = 0; y < tile; ++y)
        for (int x = 0; x < tile; ++x)
          for (int ch = 0; ch < 3; ++ch) {
            const double v = terrain.texture[(static_cast<std::size_t>(y) * tile + x) * 3 + ch] + shift +
                             pixel_noise(rng);
            const std::size_t at =
                ((static_cast<std::size_t>(r) * tile + y) * map.image.width + c * tile + x) * 3 + ch;
            map.image.rgb[at] = static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
    }
  return map;
}

std::string SamplingRule::id() const {
  if (kind == SamplingKind::MarginOppositeQuadrant) {
    return "margin_opposite_quadrant(margin=" + std::to_string(margin) + ")";
  }
  return "min_steps_avoid_walls(min_steps=" + std::to_string(min_steps) +
         ",wall_cost=" + std::to_string(wall_cost) + ")";
}

bool satisfies_rule(const SamplingRule& rule, const CostField& costs, Cell source, Cell target) {
  const Shape grid = shape_of(costs);
  if (!grid.contains(source) || !grid.contains(target) || source == target) return false;
  if (rule.kind == SamplingKind::MarginOppositeQuadrant) {
    return in_margin(target, grid, rule.margin) && in_opposite_quadrant(source, target, grid);
  }
  if (is_wall(costs, source, rule.wall_cost) || is_wall(costs, target, rule.wall_cost)) return false;
  return bfs_steps(costs, rule.wall_cost, target)(source.row, source.col) >= rule.min_steps;
}

Cell sample_target_margin(Shape grid, int margin, std::mt19937_64& rng) {
  if (margin < 1 || 2 * margin > std::min(grid.height, grid.width)) {
    throw std::invalid_argument("sample_target_margin: margin " + std::to_string(margin) +
                                " impossible on a " + to_string(grid) + " grid");
  }
  while (true) {
    const Cell c = uniform_cell(grid, rng);
    if (in_margin(c, grid, margin)) return c;
  }
}

Cell sample_source_opposite_quadrant(Cell target, Shape grid, std::mt19937_64& rng) {
  if (!grid.contains(target)) throw std::invalid_argument("sample_source_opposite_quadrant: target out of bounds");
  const int mid_r = grid.height / 2;
  const int mid_c = grid.width / 2;
  const bool top = target.row < mid_r;
  const bool left = target.col < mid_c;
  const int r = top ? uniform_int(rng, mid_r, grid.height - 1) : uniform_int(rng, 0, mid_r - 1);
  const int c = left ? uniform_int(rng, mid_c, grid.width - 1) : uniform_int(rng, 0, mid_c - 1);
  return {r, c};
}

Field<int> bfs_steps(const CostField& costs, double wall_cost, Cell from) {
  const Shape grid = shape_of(costs);
  Field<int> steps = Field<int>::Constant(grid.height, grid.width, -1);
  if (!grid.contains(from) || is_wall(costs, from, wall_cost)) return steps;
  std::deque<Cell> queue{from};
  steps(from.row, from.col) = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for_each_neighbor(c, grid, [&](Cell n) {
      if (steps(n.row, n.col) < 0 && !is_wall(costs, n, wall_cost)) {
        steps(n.row, n.col) = steps(c.row, c.col) + 1;
        queue.push_back(n);
      }
    });
  }
  return steps;
}

std::pair<Cell, Cell> sample_pair_min_steps(const CostField& costs, double wall_cost, int min_steps,
                                            std::mt19937_64& rng) {
  const Shape grid = shape_of(costs);
  for (int attempt = 0; attempt < kAttemptBudget; ++attempt) {
    const Cell target = uniform_cell(grid, rng);
    if (is_wall(costs, target, wall_cost)) continue;
    const Field<int> steps = bfs_steps(costs, wall_cost, target);
    if (steps.maxCoeff() < min_steps) continue;
    const Cell source = uniform_cell(grid, rng);
    if (!is_wall(costs, source, wall_cost) && steps(source.row, source.col) >= min_steps) {
      return {target, source};
    }
  }
  throw UnusableMapError("no endpoint pair at >= " + std::to_string(min_steps) + " steps within " +
                         std::to_string(kAttemptBudget) + " attempts");
}

Cell resample_source(const SamplingRule& rule, const CostField& costs, Cell target, std::mt19937_64& rng) {
  if (rule.kind == SamplingKind::MarginOppositeQuadrant) {
    return sample_source_opposite_quadrant(target, shape_of(costs), rng);
  }
  return sample_source_min_steps(costs, bfs_steps(costs, rule.wall_cost, target), rule.wall_cost,
                                 rule.min_steps, rng);
}

Mask label_gt_path(const CostField& costs, Cell source, Cell target) {
  return dijkstra_oracle(costs, source, target).path_mask;
}

MapSample Split::sample(std::size_t i) const {
  const Sample& s = samples.at(i);
  return {maps.at(s.map_id), s.source, s.target, s.gt_path};
}

DatasetConfig DatasetConfig::hard_defaults() {
  DatasetConfig c;
  c.grid = {20, 20};
  c.tile = 8;
  c.terrains = 10;
  c.hard = true;
  c.min_steps = 12;
  return c;
}

const Split& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "'");
}

namespace {

SamplingRule rule_for(const DatasetConfig& config) {
  SamplingRule rule;
  if (config.hard) {
    rule.kind = SamplingKind::MinStepsAvoidWalls;
    rule.min_steps = config.min_steps;
    rule.wall_cost = 25.0;
  } else {
    rule.kind = SamplingKind::MarginOppositeQuadrant;
    rule.margin = config.margin;
  }
  return rule;
}

struct GeneratedMap {
  std::shared_ptr<const TileMap> map;
  std::vector<Sample> samples;
};

GeneratedMap generate_one(const DatasetConfig& config, const Tileset& tileset, const SamplingRule& rule,
                          std::uint64_t seed) {
  for (std::uint64_t retry = 0;; ++retry) {
    const std::uint64_t map_seed = mix(seed, retry);
    auto map = std::make_shared<TileMap>(generate_map(map_seed, config.grid, tileset));
    std::mt19937_64 rng(mix(map_seed, 0x5A3D));
    GeneratedMap out{map, {}};
    try {
      for (int t = 0; t < config.targets_per_map; ++t) {
        Cell target;
        std::vector<Cell> sources;
        if (rule.kind == SamplingKind::MarginOppositeQuadrant) {
          target = sample_target_margin(config.grid, rule.margin, rng);
        } else {
          auto [tgt, first] = sample_pair_min_steps(map->costs, rule.wall_cost, rule.min_steps, rng);
          target = tgt;
          sources.push_back(first);
        }
        while (static_cast<int>(sources.size()) < config.sources_per_target) {
          sources.push_back(resample_source(rule, map->costs, target, rng));
        }
        for (Cell s : sources) out.samples.push_back({0, s, target, label_gt_path(map->costs, s, target)});
      }
      return out;
    } catch (const UnusableMapError&) {
      if (retry >= 100) throw;
    }
  }
}

Split generate_split(const DatasetConfig& config, const Tileset& tileset, const SamplingRule& rule,
                     int count, std::uint64_t split_tag, int threads) {
  std::vector<GeneratedMap> generated(count);
  parallel_for(count, threads, [&](int i) {
    generated[i] = generate_one(config, tileset, rule, mix(mix(config.seed, split_tag), static_cast<std::uint64_t>(i)));
  });
  Split split;
  for (int i = 0; i < count; ++i) {
    split.maps.push_back(generated[i].map);
    for (Sample s : generated[i].samples) {
      s.map_id = i;
      split.samples.push_back(std::move(s));
    }
  }
  return split;
}

// --- raw array helpers ------------------------------------------------------

template <typename T>
void append_raw(std::string& out, const T* data, std::size_t n) {
  out.append(reinterpret_cast<const char*>(data), n * sizeof(T));
}

template <typename T>
std::vector<T> parse_raw(const std::string& bytes) {
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
  return out;
}

struct SplitFiles {
  std::string images, costs, map_ids, sources, targets, paths;
};

SplitFiles encode_split(const Split& split) {
  SplitFiles f;
  for (const auto& m : split.maps) {
    append_raw(f.images, m->image.rgb.data(), m->image.rgb.size());
    for (Eigen::Index i = 0; i < m->costs.size(); ++i) {
      const float v = static_cast<float>(m->costs.data()[i]);
      append_raw(f.costs, &v, 1);
    }
  }
  for (const Sample& s : split.samples) {
    const std::uint32_t id = static_cast<std::uint32_t>(s.map_id);
    append_raw(f.map_ids, &id, 1);
    const std::uint16_t src[2] = {static_cast<std::uint16_t>(s.source.row), static_cast<std::uint16_t>(s.source.col)};
    const std::uint16_t tgt[2] = {static_cast<std::uint16_t>(s.target.row), static_cast<std::uint16_t>(s.target.col)};
    append_raw(f.sources, src, 2);
    append_raw(f.targets, tgt, 2);
    append_raw(f.paths, s.gt_path.data(), static_cast<std::size_t>(s.gt_path.size()));
  }
  return f;
}

const char* kSplitNames[] = {"train", "val", "test"};

}  // namespace

Dataset generate_dataset(const DatasetConfig& config, int threads) {
  if (config.grid.height < 2 || config.grid.width < 2) throw std::invalid_argument("generate_dataset: grid too small");
  if (config.n_train < 0 || config.n_val < 0 || config.n_test < 0) {
    throw std::invalid_argument("generate_dataset: negative split size");
  }
  const Tileset tileset = config.hard ? hard_tileset(config.tile) : easy_tileset(config.tile, config.terrains);
  Dataset ds;
  ds.manifest.config = config;
  ds.manifest.rule = rule_for(config);
  ds.manifest.terrain_costs = tileset.costs();
  ds.train = generate_split(config, tileset, ds.manifest.rule, config.n_train, 1, threads);
  ds.val = generate_split(config, tileset, ds.manifest.rule, config.n_val, 2, threads);
  ds.test = generate_split(config, tileset, ds.manifest.rule, config.n_test, 3, threads);
  return ds;
}

nlohmann::json to_json(const DatasetManifest& m) {
  const DatasetConfig& c = m.config;
  nlohmann::json j;
  j["schema_version"] = m.schema_version;
  j["generator"] = "nwa-tiles";
  j["grid"] = {c.grid.height, c.grid.width};
  j["tile"] = c.tile;
  j["image_size"] = {c.grid.height * c.tile, c.grid.width * c.tile};
  j["terrains"] = c.terrains;
  j["hard"] = c.hard;
  j["seed"] = c.seed;
  j["targets_per_map"] = c.targets_per_map;
  j["sources_per_target"] = c.sources_per_target;
  j["terrain_costs"] = m.terrain_costs;
  if (!m.terrain_costs.empty()) {
    j["cost_range"] = {*std::min_element(m.terrain_costs.begin(), m.terrain_costs.end()),
                       *std::max_element(m.terrain_costs.begin(), m.terrain_costs.end())};
  }
  nlohmann::json rule;
  rule["id"] = m.rule.id();
  if (m.rule.kind == SamplingKind::MarginOppositeQuadrant) {
    rule["kind"] = "margin_opposite_quadrant";
    rule["margin"] = m.rule.margin;
  } else {
    rule["kind"] = "min_steps_avoid_walls";
    rule["min_steps"] = m.rule.min_steps;
    rule["wall_cost"] = m.rule.wall_cost;
  }
  j["sampling_rule"] = rule;
  j["maps"] = {{"train", c.n_train}, {"val", c.n_val}, {"test", c.n_test}};
  const int per_map = c.targets_per_map * c.sources_per_target;
  j["samples"] = {{"train", c.n_train * per_map}, {"val", c.n_val * per_map}, {"test", c.n_test * per_map}};
  j["files"] = nlohmann::json::array();
  for (const FileEntry& f : m.files) {
    j["files"].push_back({{"path", f.path}, {"dtype", f.dtype}, {"shape", f.shape}, {"bytes", f.bytes}});
  }
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != kSchemaVersion) {
    throw DataError("manifest.json: schema version " + std::to_string(m.schema_version) +
                    ", this build reads version " + std::to_string(kSchemaVersion));
  }
  DatasetConfig& c = m.config;
  c.grid = {j.at("grid")[0].get<int>(), j.at("grid")[1].get<int>()};
  c.tile = j.at("tile").get<int>();
  c.terrains = j.at("terrains").get<int>();
  c.hard = j.at("hard").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.targets_per_map = j.at("targets_per_map").get<int>();
  c.sources_per_target = j.at("sources_per_target").get<int>();
  c.n_train = j.at("maps").at("train").get<int>();
  c.n_val = j.at("maps").at("val").get<int>();
  c.n_test = j.at("maps").at("test").get<int>();
  m.terrain_costs = j.at("terrain_costs").get<std::vector<double>>();
  const auto& rule = j.at("sampling_rule");
  if (rule.at("kind") == "margin_opposite_quadrant") {
    m.rule.kind = SamplingKind::MarginOppositeQuadrant;
    m.rule.margin = c.margin = rule.at("margin").get<int>();
  } else if (rule.at("kind") == "min_steps_avoid_walls") {
    m.rule.kind = SamplingKind::MinStepsAvoidWalls;
    m.rule.min_steps = c.min_steps = rule.at("min_steps").get<int>();
    m.rule.wall_cost = rule.at("wall_cost").get<double>();
  } else {
    throw DataError("manifest.json: unknown sampling rule " + rule.at("kind").dump());
  }
  for (const auto& f : j.at("files")) {
    m.files.push_back({f.at("path").get<std::string>(), f.at("dtype").get<std::string>(),
                       f.at("shape").get<std::vector<std::int64_t>>(), f.at("bytes").get<std::int64_t>()});
  }
  return m;
}

void save_dataset(const std::filesystem::path& dir, Dataset& dataset) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  DatasetManifest& m = dataset.manifest;
  const DatasetConfig& c = m.config;
  m.files.clear();
  const std::int64_t h = c.grid.height, w = c.grid.width, g_h = h * c.tile, g_w = w * c.tile;
  for (const char* name : kSplitNames) {
    const Split& split = dataset.split(name);
    fs::create_directories(dir / name);
    const SplitFiles f = encode_split(split);
    const auto n_maps = static_cast<std::int64_t>(split.maps.size());
    const auto n = static_cast<std::int64_t>(split.samples.size());
    const std::string p = std::string(name) + "/";
    const std::vector<std::pair<FileEntry, const std::string*>> entries = {
        {{p + "images.f32", "float32", {n_maps, g_h, g_w, 3}, 0}, &f.images},
        {{p + "costs.f32", "float32", {n_maps, h, w}, 0}, &f.costs},
        {{p + "map_ids.u32", "uint32", {n}, 0}, &f.map_ids},
        {{p + "sources.u16", "uint16", {n, 2}, 0}, &f.sources},
        {{p + "targets.u16", "uint16", {n, 2}, 0}, &f.targets},
        {{p + "paths.u8", "uint8", {n, h, w}, 0}, &f.paths},
    };
    for (auto [entry, bytes] : entries) {
      entry.bytes = static_cast<std::int64_t>(bytes->size());
      io::write_file_atomic(dir / entry.path, *bytes);
      m.files.push_back(entry);
    }
  }
  io::write_file_atomic(dir / "manifest.json", to_json(m).dump(2) + "\n");
}

void verify_sample(const Split& split, std::size_t index, const std::string& what) {
  const Sample& s = split.samples.at(index);
  const CostField& costs = split.maps.at(s.map_id)->costs;
  const NodeSequence seq = mask_to_sequence(s.gt_path, s.source, s.target);
  const auto label = what + " sample " + std::to_string(index);
  if (seq.empty() || !validate_path(seq, s.source, s.target) ||
      static_cast<int>(seq.size()) != s.gt_path.cast<int>().sum()) {
    throw DataError(label + ": stored path is not a valid simple path");
  }
  const double stored = path_cost(costs, s.gt_path);
  const double optimal = dijkstra_oracle(costs, s.source, s.target).total_cost;
  if (std::abs(stored - optimal) > 1e-9 * optimal) {
    throw DataError(label + ": stored path cost " + std::to_string(stored) + " exceeds optimum " +
                    std::to_string(optimal));
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw DataError("dataset " + dir.string() + ": manifest.json missing");
  Dataset ds;
  try {
    ds.manifest = manifest_from_json(nlohmann::json::parse(io::read_file(manifest_path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  const DatasetManifest& m = ds.manifest;
  const DatasetConfig& c = m.config;
  const int h = c.grid.height, w = c.grid.width, g_h = h * c.tile, g_w = w * c.tile;

  auto read_checked = [&](const std::string& rel, std::int64_t expected) {
    const auto it = std::find_if(m.files.begin(), m.files.end(), [&](const FileEntry& f) { return f.path == rel; });
    if (it == m.files.end()) throw DataError(rel + ": not listed in manifest inventory");
    std::string bytes;
    try {
      bytes = io::read_file(dir / rel);
    } catch (const std::exception&) {
      throw DataError(rel + ": missing");
    }
    if (static_cast<std::int64_t>(bytes.size()) != it->bytes || it->bytes != expected) {
      throw DataError(rel + ": holds " + std::to_string(bytes.size()) + " bytes, manifest lists " +
                      std::to_string(it->bytes) + ", shape implies " + std::to_string(expected));
    }
    return bytes;
  };

  const int per_map = c.targets_per_map * c.sources_per_target;
  for (const char* name : kSplitNames) {
    const std::string p = std::string(name) + "/";
    const int n_maps = name == std::string("train") ? c.n_train : name == std::string("val") ? c.n_val : c.n_test;
    const std::int64_t n = static_cast<std::int64_t>(n_maps) * per_map;
    const auto images = parse_raw<float>(read_checked(p + "images.f32", std::int64_t{n_maps} * g_h * g_w * 3 * 4));
    const auto costs = parse_raw<float>(read_checked(p + "costs.f32", std::int64_t{n_maps} * h * w * 4));
    const auto ids = parse_raw<std::uint32_t>(read_checked(p + "map_ids.u32", n * 4));
    const auto sources = parse_raw<std::uint16_t>(read_checked(p + "sources.u16", n * 4));
    const auto targets = parse_raw<std::uint16_t>(read_checked(p + "targets.u16", n * 4));
    const std::string paths = read_checked(p + "paths.u8", n * h * w);

    Split split;
    const std::size_t img_len = static_cast<std::size_t>(g_h) * g_w * 3;
    for (int i = 0; i < n_maps; ++i) {
      auto map = std::make_shared<TileMap>();
      map->image = Image{g_h, g_w, std::vector<float>(images.begin() + i * img_len, images.begin() + (i + 1) * img_len)};
      map->costs = CostField(h, w);
      for (int k = 0; k < h * w; ++k) map->costs.data()[k] = costs[static_cast<std::size_t>(i) * h * w + k];
      split.maps.push_back(std::move(map));
    }
    for (std::int64_t i = 0; i < n; ++i) {
      Sample s;
      s.map_id = static_cast<int>(ids[i]);
      if (s.map_id >= n_maps) throw DataError(p + "map_ids.u32: sample " + std::to_string(i) + " references missing map");
      s.source = {sources[2 * i], sources[2 * i + 1]};
      s.target = {targets[2 * i], targets[2 * i + 1]};
      s.gt_path = Mask(h, w);
      std::memcpy(s.gt_path.data(), paths.data() + i * h * w, static_cast<std::size_t>(h) * w);
      if (!satisfies_rule(m.rule, split.maps[s.map_id]->costs, s.source, s.target)) {
        throw DataError(p + "sources.u16: sample " + std::to_string(i) + " violates " + m.rule.id());
      }
      split.samples.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < split.samples.size(); i += 10) verify_sample(split, i, p + "paths.u8");
    (name == std::string("train") ? ds.train : name == std::string("val") ? ds.val : ds.test) = std::move(split);
  }
  return ds;
}

}  // namespace nwa::data

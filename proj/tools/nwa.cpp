// nwa: dataset generation, training, evaluation and single-instance planning.

#include <CLI11.hpp>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nwa/datagen.hpp"
#include "nwa/evalkit.hpp"
#include "nwa/io.hpp"
#include "nwa/nn/checkpoint.hpp"
#include "nwa/pipeline.hpp"

namespace fs = std::filesystem;
using namespace nwa;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path data_dir(const std::string& flag, const char* what) {
  if (!flag.empty()) return flag;
  if (const char* root = std::getenv("NWA_DATA_ROOT"); root && *root) return root;
  throw UsageError(std::string(what) + ": no dataset directory (pass --data or set NWA_DATA_ROOT)");
}

Cell parse_cell(const std::string& text, const char* flag) {
  std::istringstream in(text);
  Cell c;
  char comma = 0;
  if (!(in >> c.row >> comma >> c.col) || comma != ',' || !in.eof()) {
    throw UsageError(std::string(flag) + " expects r,c (got '" + text + "')");
  }
  return c;
}

std::string dataset_hash(const fs::path& dir, const data::DatasetManifest& m) {
  std::uint64_t h = io::fnv1a(io::read_file(dir / "manifest.json"));
  for (const auto& f : m.files) h = io::fnv1a(io::read_file(dir / f.path), h);
  return io::hex64(h);
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out;
  int grid = 12;
  int tile = 8;
  int terrains = 5;
  int n_train = 500, n_val = 50, n_test = 50;
  std::uint64_t seed = 0;
  bool hard = false;
  int margin = 3;
  int min_steps = 12;
  bool force = false;
};

int cmd_gen(const GenArgs& a, CLI::App& sub, int threads) {
  const fs::path out = data_dir(a.out, "gen");
  if (fs::exists(out) && !fs::is_directory(out)) throw UsageError(out.string() + " exists and is not a directory");
  if (fs::exists(out) && !fs::is_empty(out) && !a.force) {
    throw UsageError(out.string() + " is not empty; pass --force to overwrite");
  }
  data::DatasetConfig c = a.hard ? data::DatasetConfig::hard_defaults() : data::DatasetConfig{};
  if (!a.hard || sub.count("--grid")) c.grid = {a.grid, a.grid};
  if (!a.hard || sub.count("--terrains")) c.terrains = a.terrains;
  c.tile = a.tile;
  c.n_train = a.n_train;
  c.n_val = a.n_val;
  c.n_test = a.n_test;
  c.seed = a.seed;
  c.margin = a.margin;
  c.min_steps = a.min_steps;
  data::Dataset ds = data::generate_dataset(c, threads);
  data::save_dataset(out, ds);
  const auto& m = ds.manifest;
  std::cout << "dataset " << out.string() << "\n"
            << "  grid " << to_string(c.grid) << ", tile " << c.tile << ", image " << c.grid.height * c.tile << "x"
            << c.grid.width * c.tile << "\n"
            << "  terrains " << m.terrain_costs.size() << ", sampling " << m.rule.id() << "\n"
            << "  maps train/val/test " << c.n_train << "/" << c.n_val << "/" << c.n_test << ", samples "
            << ds.train.size() << "/" << ds.val.size() << "/" << ds.test.size() << "\n"
            << "  hash " << dataset_hash(out, m) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string variant = "nwa";
  int epochs = 30;
  NwaConfig config;
  double tau = 0.0;
  std::vector<int> widths{16, 32, 32};
  std::uint64_t seed = 0;
  std::string out;
  std::string loss_csv;
  bool quiet = false;
};

int cmd_train(TrainArgs a, int threads) {
  const fs::path dir = data_dir(a.data, "train");
  if (a.widths.size() != 3) throw UsageError("--widths expects three values");
  a.config.variant = parse_variant(a.variant);
  if (a.tau > 0.0) a.config.tau = a.tau;
  a.config.widths = {a.widths[0], a.widths[1], a.widths[2]};
  a.config.validate();
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const data::Dataset ds = data::load_dataset(dir);
  const auto& dc = ds.manifest.config;

  TrainOptions opt;
  opt.epochs = a.epochs;
  opt.seed = a.seed;
  opt.threads = threads;
  opt.loss_csv = a.loss_csv.empty() ? fs::path(out.string() + ".loss.csv") : fs::path(a.loss_csv);
  double epoch_loss = 0.0;
  int epoch_steps = 0;
  int last_epoch = 0;
  opt.on_step = [&](const LossRecord& r) {
    if (r.epoch != last_epoch) {
      if (!a.quiet) std::cerr << "epoch " << last_epoch << " mean loss " << epoch_loss / epoch_steps << "\n";
      epoch_loss = 0.0;
      epoch_steps = 0;
      last_epoch = r.epoch;
    }
    epoch_loss += r.loss_total;
    ++epoch_steps;
  };
  const TrainResult res = run_variant(ds.train, dc.grid, dc.tile, a.config, opt);
  if (epoch_steps && !a.quiet) std::cerr << "epoch " << last_epoch << " mean loss " << epoch_loss / epoch_steps << "\n";
  save_model(out, res.model);
  std::cout << "checkpoint " << out.string() << " (" << to_string(a.config.variant) << ", " << res.model.steps
            << " steps, tau " << a.config.tau_for(dc.grid) << ")\n"
            << "loss log " << opt.loss_csv.string() << "\n"
            << "hash " << model_hash(res.model) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::vector<std::string> ckpts;
  std::vector<double> eps{0, 1, 4, 9, 11, 14};
  int restarts = 0;
  std::uint64_t seed = 0;
  std::string split = "test";
  std::string out;
  std::string instances;
};

int cmd_eval(const EvalArgs& a, int threads) {
  const fs::path dir = data_dir(a.data, "eval");
  for (std::size_t i = 0; i < a.eps.size(); ++i) {
    if (!(a.eps[i] >= 0.0) || (i > 0 && !(a.eps[i] > a.eps[i - 1]))) {
      throw UsageError("--eps must be non-negative and strictly increasing");
    }
  }
  std::vector<Model> models;
  for (const auto& p : a.ckpts) models.push_back(load_model(p));
  if (a.restarts > 0) {
    std::map<Variant, int> counts;
    for (const Model& m : models) ++counts[m.config.variant];
    for (const auto& [v, n] : counts) {
      if (n != a.restarts) {
        throw UsageError("--restarts " + std::to_string(a.restarts) + " but variant " + to_string(v) + " has " +
                         std::to_string(n) + " checkpoint(s)");
      }
    }
  }
  const data::Dataset ds = data::load_dataset(dir);
  eval::SweepResult sweep;
  try {
    sweep = eval::epsilon_sweep(models, ds.split(a.split), ds.manifest.rule, a.eps, a.seed, threads);
  } catch (const std::invalid_argument& e) {
    throw data::DataError(e.what());
  }
  io::write_file_atomic(a.out, eval::sweep_csv(sweep.rows));
  if (!a.instances.empty()) io::write_file_atomic(a.instances, eval::instance_csv(sweep.instances));
  std::cout << std::fixed << std::setprecision(3);
  for (const auto& r : sweep.rows) {
    std::cout << std::setw(6) << r.variant << "  eps " << std::setw(6) << r.eps << "  CR " << r.cost_ratio_mean
              << " +- " << r.cost_ratio_std << "  genCR " << r.gen_cost_ratio_mean << " +- " << r.gen_cost_ratio_std
              << "  EN " << r.expanded_mean << " +- " << r.expanded_std << "  genEN " << r.gen_expanded_mean
              << " +- " << r.gen_expanded_std << "\n";
  }
  std::cout << "wrote " << a.out << " (" << sweep.rows.size() * 4 << " rows)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct PlanArgs {
  std::string ckpt;
  std::string data;
  std::string map;
  std::string split = "test";
  std::string source;
  std::string target;
  double eps = 0.0;
};

data::Image read_image_file(const fs::path& path, const Model& m) {
  const std::string bytes = io::read_file(path);
  data::Image img{m.grid.height * m.tile, m.grid.width * m.tile, {}};
  const std::size_t n = static_cast<std::size_t>(img.height) * img.width * 3;
  if (bytes.size() != n * sizeof(float)) {
    throw data::DataError(path.string() + ": expected " + std::to_string(n * sizeof(float)) +
                          " bytes of float32 HWC image, got " + std::to_string(bytes.size()));
  }
  img.rgb.resize(n);
  std::memcpy(img.rgb.data(), bytes.data(), bytes.size());
  return img;
}

std::string mask_rows(const Mask& m, const Mask* overlay = nullptr) {
  std::string s;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    s += "  ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      s += overlay && (*overlay)(r, c) ? '*' : m(r, c) ? '+' : '.';
    }
    s += '\n';
  }
  return s;
}

int cmd_plan(const PlanArgs& a) {
  const Model model = load_model(a.ckpt);
  const Cell source = parse_cell(a.source, "--source");
  const Cell target = parse_cell(a.target, "--target");
  if (!model.grid.contains(source) || !model.grid.contains(target)) {
    throw UsageError("endpoint outside the " + to_string(model.grid) + " grid");
  }
  if (a.eps < 0.0) throw UsageError("--eps must be >= 0");
  data::Image image;
  std::string map_label = a.map;
  const bool is_index = !a.map.empty() && a.map.find_first_not_of("0123456789") == std::string::npos;
  if (is_index) {
    const data::Dataset ds = data::load_dataset(data_dir(a.data, "plan"));
    const data::Split& split = ds.split(a.split);
    const std::size_t idx = std::stoul(a.map);
    if (idx >= split.maps.size()) {
      throw UsageError("--map " + a.map + " out of range (" + std::to_string(split.maps.size()) + " maps)");
    }
    image = split.maps[idx]->image;
    map_label = a.split + "/" + a.map;
  } else {
    image = read_image_file(a.map, model);
  }

  const Prediction pred = predict(model, image, source, target);
  const SearchResult<double> res = plan(model, pred, source, target, a.eps);
  const double opt = dijkstra_oracle(pred.costs, source, target).total_cost;
  const double slack = (1.0 + a.eps) * opt - res.total_cost;
  const int expanded = eval::expanded_nodes(res.expansions);

  std::cout << std::setprecision(6) << std::fixed;
  std::cout << "map " << map_label << "  variant " << to_string(model.config.variant) << "  eps " << a.eps << "\n";
  std::cout << "path (" << res.path.size() << " cells):";
  for (Cell c : res.path) std::cout << " " << to_string(c);
  std::cout << "\n<W,Y> " << res.total_cost << "\n"
            << "optimum under W " << opt << "\n"
            << "bound slack (1+eps)*opt - cost " << slack << "\n"
            << "expanded " << expanded << "\n"
            << "expansions (+) with path (*):\n"
            << mask_rows(res.expansions, &res.path_mask);

  nlohmann::json rec;
  rec["map"] = map_label;
  rec["variant"] = to_string(model.config.variant);
  rec["eps"] = a.eps;
  rec["source"] = {source.row, source.col};
  rec["target"] = {target.row, target.col};
  rec["path"] = nlohmann::json::array();
  for (Cell c : res.path) rec["path"].push_back({c.row, c.col});
  rec["cost"] = res.total_cost;
  rec["optimum"] = opt;
  rec["slack"] = slack;
  rec["expanded"] = expanded;
  std::cout << "RESULT " << rec.dump() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural Weighted A*: learned costs and heuristics with a runtime accuracy/efficiency tradeoff"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic tile dataset");
  g->add_option("--out", gen.out, "Output directory (default: $NWA_DATA_ROOT)");
  g->add_option("--grid", gen.grid, "Grid side in cells (20 with --hard)")->capture_default_str()->check(CLI::Range(2, 1024));
  g->add_option("--tile", gen.tile, "Tile side in pixels")->capture_default_str()->check(CLI::Range(1, 256));
  g->add_option("--terrains", gen.terrains, "Terrain count for the easy set")->capture_default_str()->check(CLI::Range(2, 64));
  g->add_option("--train", gen.n_train, "Training maps")->capture_default_str()->check(CLI::NonNegativeNumber);
  g->add_option("--val", gen.n_val, "Validation maps")->capture_default_str()->check(CLI::NonNegativeNumber);
  g->add_option("--test", gen.n_test, "Test maps")->capture_default_str()->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_flag("--hard", gen.hard, "Hard set: 20x20 grid, ten terrains with walls and texture confusers");
  g->add_option("--margin", gen.margin, "Target margin in cells (easy set)")->capture_default_str();
  g->add_option("--min-steps", gen.min_steps, "Minimum source-target BFS steps (hard set)")->capture_default_str();
  g->add_flag("--force", gen.force, "Overwrite a non-empty output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--data", tr.data, "Dataset directory (default: $NWA_DATA_ROOT)");
  t->add_option("--variant", tr.variant, "nwa, bba, na, admna or nsna")->capture_default_str();
  t->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
  t->add_option("--lr", tr.config.lr, "Adam learning rate")->capture_default_str();
  t->add_option("--alpha", tr.config.alpha, "Path loss weight")->capture_default_str();
  t->add_option("--beta", tr.config.beta, "Expansion loss weight")->capture_default_str();
  t->add_option("--lambda", tr.config.lambda, "Black-box interpolation strength")->capture_default_str();
  t->add_option("--tau", tr.tau, "Neural A* temperature (default sqrt(grid width))");
  t->add_option("--eps-min", tr.config.eps_lo, "Lower end of the training eps range")->capture_default_str();
  t->add_option("--eps-max", tr.config.eps_hi, "Upper end of the training eps range")->capture_default_str();
  t->add_option("--batch", tr.config.batch, "Samples per batch (whole maps)")->capture_default_str();
  t->add_option("--widths", tr.widths, "Encoder channel widths (three values)")->capture_default_str()->expected(3);
  t->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--loss-csv", tr.loss_csv, "Loss log path (default <out>.loss.csv)");
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress on stderr");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Epsilon sweep of one or more checkpoints");
  e->add_option("--data", ev.data, "Dataset directory (default: $NWA_DATA_ROOT)");
  e->add_option("--ckpt", ev.ckpts, "Checkpoints; several of one variant are restarts")->required()->check(CLI::ExistingFile);
  e->add_option("--eps", ev.eps, "Comma-separated eps values")->delimiter(',')->capture_default_str();
  e->add_option("--restarts", ev.restarts, "Required checkpoints per variant (0 = any)")->capture_default_str();
  e->add_option("--seed", ev.seed, "Seed for random-source draws")->capture_default_str();
  e->add_option("--split", ev.split, "Split to evaluate")->capture_default_str()->check(CLI::IsMember({"train", "val", "test"}));
  e->add_option("--out", ev.out, "Sweep CSV path")->required();
  e->add_option("--instances", ev.instances, "Optional per-instance CSV path");

  PlanArgs pl;
  auto* p = app.add_subcommand("plan", "Plan one instance with a checkpoint");
  p->add_option("--ckpt", pl.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  p->add_option("--data", pl.data, "Dataset directory when --map is an index (default: $NWA_DATA_ROOT)");
  p->add_option("--map", pl.map, "Map index in --split, or a raw float32 HWC image file")->required();
  p->add_option("--split", pl.split, "Split for map indices")->capture_default_str()->check(CLI::IsMember({"train", "val", "test"}));
  p->add_option("--source", pl.source, "Source cell r,c")->required();
  p->add_option("--target", pl.target, "Target cell r,c")->required();
  p->add_option("--eps", pl.eps, "Tradeoff parameter")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, *g, threads);
    if (t->parsed()) return cmd_train(tr, threads);
    if (e->parsed()) return cmd_eval(ev, threads);
    if (p->parsed()) return cmd_plan(pl);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  } catch (const NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << "\n";
    return kNumeric;
  } catch (const data::DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kData;
  } catch (const nn::CheckpointError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  } catch (const std::exception& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kData;
  }
  return kUsage;
}

#include "nwa/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "nwa/io.hpp"
#include "nwa/nn/adam.hpp"
#include "nwa/nn/checkpoint.hpp"
#include "nwa/parallel.hpp"

namespace nwa {

using nn::Tensor;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::NWA: return "nwa";
    case Variant::BBA: return "bba";
    case Variant::NA: return "na";
    case Variant::AdmNA: return "admna";
    case Variant::NSNA: return "nsna";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Variant v : {Variant::NWA, Variant::BBA, Variant::NA, Variant::AdmNA, Variant::NSNA}) {
    if (to_string(v) == s) return v;
  }
  throw std::invalid_argument("unknown variant '" + name + "' (expected nwa, bba, na, admna, nsna)");
}

int cost_encoder_channels(Variant v) {
  switch (v) {
    case Variant::NWA:
    case Variant::BBA: return 3;
    case Variant::NA:
    case Variant::AdmNA: return 5;
    case Variant::NSNA: return 4;
  }
  return 0;
}

int heuristic_encoder_channels(Variant v) { return v == Variant::NWA ? 4 : 0; }

double NwaConfig::tau_for(Shape grid) const { return tau ? *tau : std::sqrt(static_cast<double>(grid.width)); }

void NwaConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("NwaConfig: " + what); };
  if (!(w_min > 0.0)) fail("w_min must be > 0");
  if (!(w_max > w_min)) fail("w_max must exceed w_min");
  if (!(lambda > 0.0)) fail("lambda must be > 0");
  if (tau && !(*tau > 0.0)) fail("tau must be > 0");
  if (alpha < 0.0 || beta < 0.0 || !(alpha + beta > 0.0)) fail("alpha, beta must be >= 0, not both zero");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (eps_lo < 0.0 || eps_hi < eps_lo) fail("eps range must satisfy 0 <= lo <= hi");
  if (batch < 1) fail("batch must be >= 1");
  for (int w : widths)
    if (w < 1) fail("encoder widths must be >= 1");
}

// ---------------------------------------------------------------------------
// Model and checkpoints.
// ---------------------------------------------------------------------------

namespace {
bool scaled_costs(Variant v) { return v == Variant::NWA || v == Variant::BBA; }
}  // namespace

Eigen::VectorXd Model::parameters() const {
  const Eigen::VectorXd a = cost_encoder.parameters();
  if (!has_heuristic_encoder()) return a;
  const Eigen::VectorXd b = heuristic_encoder.parameters();
  Eigen::VectorXd flat(a.size() + b.size());
  flat << a, b;
  return flat;
}

void Model::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("Model::set_parameters: wrong size");
  const Eigen::Index n = cost_encoder.parameter_count();
  cost_encoder.set_parameters(flat.head(n));
  if (has_heuristic_encoder()) heuristic_encoder.set_parameters(flat.tail(flat.size() - n));
}

Eigen::Index Model::parameter_count() const {
  return cost_encoder.parameter_count() + (has_heuristic_encoder() ? heuristic_encoder.parameter_count() : 0);
}

Model make_model(const NwaConfig& config, Shape grid, int tile, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  m.grid = grid;
  m.tile = tile;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  // Scaled-cost variants normalize the raw map per image instead of squashing
  // it; a sigmoid here saturates and the costs collapse onto w_min.
  m.cost_encoder = nn::Encoder(
      {cost_encoder_channels(config.variant), config.widths, tile, !scaled_costs(config.variant)});
  m.cost_encoder.init(rng);
  if (m.has_heuristic_encoder()) {
    m.heuristic_encoder = nn::Encoder({heuristic_encoder_channels(config.variant), config.widths, tile});
    m.heuristic_encoder.init(rng);
  }
  return m;
}

namespace {

nlohmann::json encoder_json(const std::string& role, const nn::Encoder& e) {
  const auto& c = e.config();
  return {{"role", role},
          {"layers", c.sigmoid_head ? "conv3x3-relu|avgpool|conv3x3-relu|conv3x3-relu|conv1x1-sigmoid"
                                    : "conv3x3-relu|avgpool|conv3x3-relu|conv3x3-relu|conv1x1|range-normalize"},
          {"in_channels", c.in_channels},
          {"widths", c.widths},
          {"parameters", e.parameter_count()}};
}

nn::CheckpointFile to_checkpoint(const Model& m) {
  const NwaConfig& c = m.config;
  nlohmann::json j;
  j["format"] = "nwa-checkpoint";
  j["variant"] = to_string(c.variant);
  j["grid"] = {m.grid.height, m.grid.width};
  j["tile"] = m.tile;
  j["seed"] = m.seed;
  j["steps"] = m.steps;
  j["config"] = {{"w_min", c.w_min}, {"w_max", c.w_max}, {"lambda", c.lambda},
                 {"tau", c.tau_for(m.grid)}, {"tau_explicit", c.tau.has_value()},
                 {"alpha", c.alpha}, {"beta", c.beta}, {"lr", c.lr},
                 {"eps_range", {c.eps_lo, c.eps_hi}}, {"batch", c.batch}};
  j["encoders"] = nlohmann::json::array({encoder_json("cost", m.cost_encoder)});
  if (m.has_heuristic_encoder()) j["encoders"].push_back(encoder_json("heuristic", m.heuristic_encoder));
  j["param_order"] = "encoders in listed order; per layer kernel (out,in,k,k) row-major then bias";
  return {j, m.parameters()};
}

Model from_checkpoint(const nn::CheckpointFile& file, const std::string& name) {
  try {
    const auto& j = file.manifest;
    if (j.at("format") != "nwa-checkpoint") throw nn::CheckpointError("checkpoint " + name + ": unknown format");
    NwaConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    const auto& jc = j.at("config");
    c.w_min = jc.at("w_min");
    c.w_max = jc.at("w_max");
    c.lambda = jc.at("lambda");
    if (jc.at("tau_explicit").get<bool>()) c.tau = jc.at("tau").get<double>();
    c.alpha = jc.at("alpha");
    c.beta = jc.at("beta");
    c.lr = jc.at("lr");
    c.eps_lo = jc.at("eps_range")[0];
    c.eps_hi = jc.at("eps_range")[1];
    c.batch = jc.at("batch");
    c.widths = j.at("encoders")[0].at("widths").get<std::array<int, 3>>();
    Model m = make_model(c, {j.at("grid")[0].get<int>(), j.at("grid")[1].get<int>()}, j.at("tile").get<int>(),
                         j.at("seed").get<std::uint64_t>());
    m.steps = j.at("steps").get<std::int64_t>();
    if (file.params.size() != m.parameter_count()) {
      throw nn::CheckpointError("checkpoint " + name + ": " + std::to_string(file.params.size()) +
                                " parameters, architecture needs " + std::to_string(m.parameter_count()));
    }
    m.set_parameters(file.params);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw nn::CheckpointError("checkpoint " + name + ": bad manifest: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw nn::CheckpointError("checkpoint " + name + ": " + e.what());
  }
}

}  // namespace

void save_model(const std::filesystem::path& path, const Model& model) {
  nn::write_checkpoint(path, to_checkpoint(model));
}

Model load_model(const std::filesystem::path& path) {
  return from_checkpoint(nn::read_checkpoint(path), path.string());
}

std::string model_hash(const Model& model) {
  return io::hex64(io::fnv1a(nn::encode_checkpoint(to_checkpoint(model))));
}

// ---------------------------------------------------------------------------
// Heuristic construction and losses.
// ---------------------------------------------------------------------------

HeuristicField<double> build_h_epsilon(const CostField& h_neural, const HeuristicField<double>& h_c,
                                       double eps) {
  if (shape_of(h_neural) != shape_of(h_c.values)) {
    throw std::invalid_argument("build_h_epsilon: shape mismatch " + to_string(shape_of(h_neural)) + " vs " +
                                to_string(shape_of(h_c.values)));
  }
  if (!(eps >= 0.0)) throw std::invalid_argument("build_h_epsilon: eps must be >= 0");
  if (h_neural.size() > 0 && (h_neural.minCoeff() < 0.0 || h_neural.maxCoeff() > 1.0)) {
    throw std::invalid_argument("build_h_epsilon: h_neural outside [0, 1]");
  }
  return {((1.0 + eps * h_neural.array()) * h_c.values.array()).matrix(), h_c.target};
}

double hamming_loss(const CostField& a, const CostField& b) {
  if (shape_of(a) != shape_of(b)) throw std::invalid_argument("hamming_loss: shape mismatch");
  if (a.size() == 0) return 0.0;
  return (a.array() * (1.0 - b.array()) + (1.0 - a.array()) * b.array()).mean();
}

CostField hamming_loss_grad(const CostField& a, const CostField& b) {
  if (shape_of(a) != shape_of(b)) throw std::invalid_argument("hamming_loss_grad: shape mismatch");
  return ((1.0 - 2.0 * a.array()) / static_cast<double>(a.size())).matrix();
}

double total_loss(const Mask& y_gt, const Mask& y, const CostField& e, double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("total_loss: weights must be >= 0");
  const CostField gt = y_gt.cast<double>();
  return alpha * hamming_loss(gt, y.cast<double>()) + beta * hamming_loss(gt, e);
}

// ---------------------------------------------------------------------------
// Prediction.
// ---------------------------------------------------------------------------

namespace {

CostField to_field(const Tensor& t) {
  return Eigen::Map<const CostField>(t.data(), t.dim(1), t.dim(2));
}

Tensor to_tensor(const CostField& f) {
  Tensor t({1, static_cast<int>(f.rows()), static_cast<int>(f.cols())});
  Eigen::Map<CostField>(t.data(), f.rows(), f.cols()) = f;
  return t;
}

Tensor with_cells(const Tensor& image, const Model& m, std::initializer_list<Cell> cells) {
  std::vector<Tensor> planes;
  for (Cell c : cells) planes.push_back(nn::cell_channel(c.row, c.col, m.grid.height, m.grid.width, m.tile));
  std::vector<const Tensor*> parts{&image};
  for (const Tensor& p : planes) parts.push_back(&p);
  return nn::concat_channels(parts);
}

// Encoder input for the cost-predicting network of each variant.
Tensor cost_input(const Model& m, const Tensor& image, Cell source, Cell target) {
  switch (m.config.variant) {
    case Variant::NWA:
    case Variant::BBA: return image;
    case Variant::NA:
    case Variant::AdmNA: return with_cells(image, m, {source, target});
    case Variant::NSNA: return with_cells(image, m, {target});
  }
  return image;
}

void check_geometry(const Model& m, const data::Image& image) {
  if (image.height != m.grid.height * m.tile || image.width != m.grid.width * m.tile) {
    throw std::invalid_argument("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                                " does not match model grid " + to_string(m.grid) + " at tile " +
                                std::to_string(m.tile));
  }
}

// Per-variant heuristic used by both training and inference; `h_neural` and
// `eps` only matter for NWA.
HeuristicField<double> variant_heuristic(const Model& m, const CostField& costs, const CostField* h_neural,
                                         Cell target, double eps) {
  const Shape shape = shape_of(costs);
  switch (m.config.variant) {
    case Variant::NWA:
      return build_h_epsilon(*h_neural, h_chebyshev(m.config.w_min, target, shape), eps);
    case Variant::BBA: return h_chebyshev(m.config.w_min, target, shape);
    case Variant::NA: return h_na(target, shape);
    case Variant::AdmNA:
    case Variant::NSNA: return h_chebyshev(costs.minCoeff(), target, shape);
  }
  throw std::logic_error("variant_heuristic");
}

}  // namespace

Prediction predict(const Model& model, const data::Image& image, Cell source, Cell target) {
  check_geometry(model, image);
  if (!model.grid.contains(source) || !model.grid.contains(target)) {
    throw std::invalid_argument("predict: endpoint outside the " + to_string(model.grid) + " grid");
  }
  const Tensor img = image.to_tensor();
  Prediction p;
  Tensor out = model.cost_encoder.forward(cost_input(model, img, source, target));
  if (scaled_costs(model.config.variant)) {
    out = nn::minmax_scale(nn::range_normalize(out), model.config.w_min, model.config.w_max);
  }
  p.costs = to_field(out);
  if (model.has_heuristic_encoder()) {
    p.h_neural = to_field(model.heuristic_encoder.forward(with_cells(img, model, {target})));
  }
  return p;
}

HeuristicField<double> planning_heuristic(const Model& model, const Prediction& pred, Cell target, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("planning_heuristic: eps must be >= 0");
  return variant_heuristic(model, pred.costs, pred.h_neural ? &*pred.h_neural : nullptr, target, eps);
}

SearchResult<double> plan(const Model& model, const Prediction& pred, Cell source, Cell target, double eps) {
  return astar(pred.costs, planning_heuristic(model, pred, target, eps), source, target);
}

SearchResult<double> infer(const Model& model, const data::Image& image, Cell source, Cell target, double eps) {
  return plan(model, predict(model, image, source, target), source, target, eps);
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

namespace {

struct SampleRef {
  Cell source;
  Cell target;
  const Mask* gt_path;
};

struct GroupResult {
  double loss_path = 0.0;  // sums over the group's samples
  double loss_exp = 0.0;
  double loss = 0.0;
  Eigen::VectorXd grad;
  std::vector<Mask> y;
  std::vector<Mask> e;
};

// Loss terms of one sample given its costs; accumulates dL/dW and, for NWA,
// dL/dH_neural.
void sample_terms(const Model& m, const CostField& costs, const CostField* h_neural, const SampleRef& s,
                  double eps, double tau, GroupResult& out, CostField& grad_w, CostField* grad_h) {
  const NwaConfig& c = m.config;
  const CostField gt = s.gt_path->cast<double>();
  const Shape shape = shape_of(costs);
  double lp = 0.0;
  double le = 0.0;
  Mask y;
  Mask e;
  if (c.variant == Variant::NWA || c.variant == Variant::BBA) {
    auto [y_mask, ctx] = blackbox_forward(costs, h_chebyshev(c.w_min, s.target, shape), s.source, s.target,
                                          c.lambda);
    y = std::move(y_mask);
    lp = hamming_loss(gt, y.cast<double>());
    if (c.alpha > 0.0) {
      // The perturbation is taken along the gradient of the cell-summed loss so
      // lambda is measured in cost units; the result is scaled back to the mean.
      const double n = static_cast<double>(gt.size());
      grad_w += blackbox_backward(ctx, c.alpha * n * hamming_loss_grad(gt, y.cast<double>())) / n;
    }
    if (c.variant == Variant::NWA) {
      const HeuristicField<double> h_c = h_chebyshev(c.w_min, s.target, shape);
      const HeuristicField<double> h_eps = build_h_epsilon(*h_neural, h_c, eps);
      NeuralAstarOutput na = neural_astar_forward(stop_gradient(costs), h_eps, s.source, s.target, tau);
      e = std::move(na.expansions);
      le = hamming_loss(gt, e.cast<double>());
      if (c.beta > 0.0 && eps > 0.0) {
        const CostField d_h_eps = neural_astar_backward(na.trace, c.beta * hamming_loss_grad(gt, e.cast<double>()));
        *grad_h += (d_h_eps.array() * eps * h_c.values.array()).matrix();
      }
    } else {
      e = Mask::Zero(shape.height, shape.width);
    }
  } else {
    const HeuristicField<double> h = variant_heuristic(m, costs, nullptr, s.target, eps);
    NeuralAstarOutput na = neural_astar_forward(costs, h, s.source, s.target, tau);
    y = na.search.path_mask;
    e = std::move(na.expansions);
    lp = hamming_loss(gt, y.cast<double>());
    le = hamming_loss(gt, e.cast<double>());
    if (c.beta > 0.0) {
      grad_w += neural_astar_cost_backward(na.trace, c.beta * hamming_loss_grad(gt, e.cast<double>()));
    }
  }
  const bool use_path = c.variant == Variant::NWA || c.variant == Variant::BBA;
  const bool use_exp = c.variant != Variant::BBA;
  out.loss_path += lp;
  out.loss_exp += le;
  out.loss += (use_path ? c.alpha * lp : 0.0) + (use_exp ? c.beta * le : 0.0);
  out.y.push_back(std::move(y));
  out.e.push_back(std::move(e));
}

// Forward and backward for all samples drawn from one map. Encoders run once
// per distinct input: per map for image-only inputs, per target or per
// (source, target) otherwise.
GroupResult process_map_group(const Model& m, const data::Image& image, const std::vector<SampleRef>& samples,
                              double eps) {
  const NwaConfig& c = m.config;
  const double tau = c.tau_for(m.grid);
  GroupResult out;
  out.grad = Eigen::VectorXd::Zero(m.parameter_count());
  const Eigen::Index n_cost = m.cost_encoder.parameter_count();
  auto grad_cost = out.grad.head(n_cost);
  const Tensor img = image.to_tensor();

  auto run_cost_encoder = [&](const Tensor& input, nn::Encoder::Cache& cache) {
    Tensor o = m.cost_encoder.forward(input, &cache);
    return scaled_costs(c.variant) ? to_field(nn::minmax_scale(nn::range_normalize(o), c.w_min, c.w_max))
                                   : to_field(o);
  };
  auto backprop_cost = [&](const nn::Encoder::Cache& cache, const CostField& grad_w) {
    Tensor g = to_tensor(grad_w);
    if (scaled_costs(c.variant)) {
      g = nn::range_normalize_backward(cache.output, nn::minmax_scale_backward(g, c.w_min, c.w_max));
    }
    m.cost_encoder.backward(cache, g, grad_cost);
  };

  // Group sample indices by the part of the input that varies per sample.
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Cell t = samples[i].target;
    const Cell s = samples[i].source;
    std::pair<int, int> key{0, 0};
    if (c.variant == Variant::NSNA || c.variant == Variant::NWA) key = {t.row * m.grid.width + t.col, 0};
    if (c.variant == Variant::NA || c.variant == Variant::AdmNA) {
      key = {t.row * m.grid.width + t.col, s.row * m.grid.width + s.col};
    }
    groups[key].push_back(i);
  }

  out.y.resize(samples.size());
  out.e.resize(samples.size());
  GroupResult scratch;
  auto run_samples = [&](const std::vector<std::size_t>& idx, const CostField& costs, const CostField* h_neural,
                         CostField& grad_w, CostField* grad_h) {
    for (std::size_t i : idx) {
      scratch.y.clear();
      scratch.e.clear();
      sample_terms(m, costs, h_neural, samples[i], eps, tau, scratch, grad_w, grad_h);
      out.y[i] = std::move(scratch.y.back());
      out.e[i] = std::move(scratch.e.back());
    }
  };

  const Shape g = m.grid;
  if (c.variant == Variant::NWA || c.variant == Variant::BBA) {
    nn::Encoder::Cache cache;
    const CostField costs = run_cost_encoder(img, cache);
    CostField grad_w = CostField::Zero(g.height, g.width);
    for (const auto& [key, idx] : groups) {
      if (c.variant == Variant::BBA) {
        run_samples(idx, costs, nullptr, grad_w, nullptr);
        continue;
      }
      const Cell t = samples[idx.front()].target;
      nn::Encoder::Cache h_cache;
      const CostField h_neural = to_field(m.heuristic_encoder.forward(with_cells(img, m, {t}), &h_cache));
      CostField grad_h = CostField::Zero(g.height, g.width);
      run_samples(idx, costs, &h_neural, grad_w, &grad_h);
      if (c.beta > 0.0 && eps > 0.0) {
        m.heuristic_encoder.backward(h_cache, to_tensor(grad_h), out.grad.tail(out.grad.size() - n_cost));
      }
    }
    if (c.alpha > 0.0) backprop_cost(cache, grad_w);
  } else {
    for (const auto& [key, idx] : groups) {
      const SampleRef& first = samples[idx.front()];
      nn::Encoder::Cache cache;
      const CostField costs = run_cost_encoder(cost_input(m, img, first.source, first.target), cache);
      CostField grad_w = CostField::Zero(g.height, g.width);
      run_samples(idx, costs, nullptr, grad_w, nullptr);
      if (c.beta > 0.0) backprop_cost(cache, grad_w);
    }
  }
  out.loss_path = scratch.loss_path;
  out.loss_exp = scratch.loss_exp;
  out.loss = scratch.loss;
  return out;
}

void check_sample(const Model& m, const data::Image& image, const SampleRef& s) {
  check_geometry(m, image);
  if (!m.grid.contains(s.source) || !m.grid.contains(s.target)) {
    throw std::invalid_argument("sample endpoint outside the " + to_string(m.grid) + " grid");
  }
  if (shape_of(*s.gt_path) != m.grid) throw std::invalid_argument("ground-truth path shape mismatch");
}

}  // namespace

ForwardTrainResult forward_train(const Model& model, const data::MapSample& sample, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("forward_train: eps must be >= 0");
  const SampleRef ref{sample.source, sample.target, &sample.gt_path};
  check_sample(model, sample.image(), ref);
  GroupResult g = process_map_group(model, sample.image(), {ref}, eps);
  return {std::move(g.y.front()), std::move(g.e.front()), g.loss_path, g.loss_exp, g.loss, std::move(g.grad)};
}

double evaluate_loss(const Model& model, const std::vector<data::MapSample>& samples, double eps, int threads) {
  if (samples.empty()) return 0.0;
  std::vector<double> losses(samples.size());
  parallel_for(static_cast<int>(samples.size()), threads, [&](int i) {
    const auto& s = samples[i];
    losses[i] = process_map_group(model, s.image(), {{s.source, s.target, &s.gt_path}}, eps).loss;
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(samples.size());
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "step,epoch,eps,loss_total,loss_path,loss_exp\n";
  for (const LossRecord& r : log) {
    out << r.step << ',' << r.epoch << ',' << r.eps << ',' << r.loss_total << ',' << r.loss_path << ','
        << r.loss_exp << '\n';
  }
  io::write_file_atomic(path, out.str());
}

TrainResult train(const data::Split& split, Shape grid, int tile, const NwaConfig& config,
                  const TrainOptions& options) {
  if (split.samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (options.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  TrainResult result{make_model(config, grid, tile, options.seed), {}};
  Model& model = result.model;

  std::vector<std::vector<SampleRef>> by_map(split.maps.size());
  for (const data::Sample& s : split.samples) {
    const SampleRef ref{s.source, s.target, &s.gt_path};
    check_sample(model, split.maps.at(s.map_id)->image, ref);
    by_map[s.map_id].push_back(ref);
  }
  std::vector<int> order;
  for (std::size_t i = 0; i < by_map.size(); ++i)
    if (!by_map[i].empty()) order.push_back(static_cast<int>(i));

  // Separate streams for shuffling and eps draws keep one from shifting the other.
  std::mt19937_64 shuffle_rng(options.seed ^ 0x5EEDF00DULL);
  std::mt19937_64 eps_rng(options.seed ^ 0xE95E95ULL);
  std::uniform_real_distribution<double> eps_dist(config.eps_lo, config.eps_hi);
  nn::AdamState adam = nn::AdamState::zeros(model.parameter_count());
  const nn::AdamConfig adam_config{config.lr};
  Eigen::VectorXd params = model.parameters();

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::size_t at = 0;
    while (at < order.size()) {
      std::vector<int> batch_maps;
      std::size_t n_samples = 0;
      while (at < order.size() && n_samples < static_cast<std::size_t>(config.batch)) {
        batch_maps.push_back(order[at]);
        n_samples += by_map[order[at]].size();
        ++at;
      }
      const double eps = config.eps_lo == config.eps_hi ? config.eps_lo : eps_dist(eps_rng);
      std::vector<GroupResult> parts(batch_maps.size());
      parallel_for(static_cast<int>(batch_maps.size()), options.threads, [&](int i) {
        const int id = batch_maps[i];
        parts[i] = process_map_group(model, split.maps[id]->image, by_map[id], eps);
      });
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
      LossRecord rec;
      for (const GroupResult& p : parts) {
        grad += p.grad;
        rec.loss_total += p.loss;
        rec.loss_path += p.loss_path;
        rec.loss_exp += p.loss_exp;
      }
      const double n = static_cast<double>(n_samples);
      grad /= n;
      rec.loss_total /= n;
      rec.loss_path /= n;
      rec.loss_exp /= n;
      rec.step = ++model.steps;
      rec.epoch = epoch;
      rec.eps = eps;
      if (!std::isfinite(rec.loss_total) || !grad.allFinite()) {
        throw NumericError("non-finite loss or gradient at step " + std::to_string(rec.step) + " (epoch " +
                           std::to_string(epoch) + ", eps " + std::to_string(eps) + ")");
      }
      nn::adam_step(params, grad, adam, adam_config);
      model.set_parameters(params);
      result.log.push_back(rec);
      if (options.on_step) options.on_step(rec);
    }
  }
  if (!options.loss_csv.empty()) write_loss_csv(options.loss_csv, result.log);
  return result;
}

TrainResult run_variant(const data::Split& split, Shape grid, int tile, const NwaConfig& config,
                        const TrainOptions& options) {
  switch (config.variant) {
    case Variant::NWA:
    case Variant::BBA:
    case Variant::NA:
    case Variant::AdmNA:
    case Variant::NSNA: return train(split, grid, tile, config, options);
  }
  throw std::invalid_argument("run_variant: unknown variant");
}

}  // namespace nwa

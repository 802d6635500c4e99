#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nwa/datagen.hpp"
#include "nwa/diff_solver.hpp"
#include "nwa/grid.hpp"
#include "nwa/nn/encoder.hpp"
#include "nwa/search.hpp"

namespace nwa {

/// A loss or gradient went non-finite during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Variant { NWA, BBA, NA, AdmNA, NSNA };

std::string to_string(Variant v);
/// Accepts "nwa", "bba", "na", "admna", "nsna" (case-insensitive).
Variant parse_variant(const std::string& name);

/// Channels fed to the encoder that predicts costs (NWA: 3) or, for the
/// single-encoder Neural A* variants, costs from image + endpoint planes.
int cost_encoder_channels(Variant v);
/// Input channels of the heuristic-predicting encoder; 0 when absent.
int heuristic_encoder_channels(Variant v);

struct NwaConfig {
  Variant variant = Variant::NWA;
  double w_min = 1.0;
  double w_max = 10.0;
  double lambda = kDefaultLambda;
  std::optional<double> tau;  // defaults to sqrt(grid width)
  double alpha = 1.0;
  double beta = 0.1;
  double lr = 1e-3;
  double eps_lo = 0.0;
  double eps_hi = 9.0;
  int batch = 64;
  std::array<int, 3> widths{16, 32, 32};

  double tau_for(Shape grid) const;
  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

struct Model {
  NwaConfig config;
  Shape grid;
  int tile = 8;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  nn::Encoder cost_encoder;
  nn::Encoder heuristic_encoder;  // NWA only

  bool has_heuristic_encoder() const { return config.variant == Variant::NWA; }
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  Eigen::Index parameter_count() const;
};

/// Fresh model with seeded Kaiming initialisation.
Model make_model(const NwaConfig& config, Shape grid, int tile, std::uint64_t seed);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);
/// FNV-1a over the serialized checkpoint bytes.
std::string model_hash(const Model& model);

// ---------------------------------------------------------------------------
// Heuristic construction and losses.
// ---------------------------------------------------------------------------

/// H_eps = (1 + eps * h_neural) * h_c.
HeuristicField<double> build_h_epsilon(const CostField& h_neural, const HeuristicField<double>& h_c,
                                       double eps);

/// mean(a (1 - b) + (1 - a) b): the fraction of differing cells on binary
/// inputs, linear in each argument otherwise.
double hamming_loss(const CostField& a, const CostField& b);
/// d hamming_loss / d b.
CostField hamming_loss_grad(const CostField& a, const CostField& b);

double total_loss(const Mask& y_gt, const Mask& y, const CostField& e, double alpha, double beta);

// ---------------------------------------------------------------------------
// Prediction and inference.
// ---------------------------------------------------------------------------

struct Prediction {
  CostField costs;
  std::optional<CostField> h_neural;  // NWA only
};

Prediction predict(const Model& model, const data::Image& image, Cell source, Cell target);

/// Heuristic the variant searches with at inference. Only NWA reads `eps`;
/// the baselines have no tradeoff parameter.
HeuristicField<double> planning_heuristic(const Model& model, const Prediction& pred, Cell target,
                                          double eps);

/// One standard A* call on the predicted costs.
SearchResult<double> plan(const Model& model, const Prediction& pred, Cell source, Cell target, double eps);
SearchResult<double> infer(const Model& model, const data::Image& image, Cell source, Cell target, double eps);

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct ForwardTrainResult {
  Mask y;
  Mask e;
  double loss_path = 0.0;
  double loss_exp = 0.0;
  double loss = 0.0;
  /// dloss/dparams in Model::parameters() order.
  Eigen::VectorXd grad;
};

/// Loss and gradient for one sample at a fixed eps.
ForwardTrainResult forward_train(const Model& model, const data::MapSample& sample, double eps);

/// Mean loss over `samples` at a fixed eps, without gradients.
double evaluate_loss(const Model& model, const std::vector<data::MapSample>& samples, double eps,
                     int threads = 1);

struct LossRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double eps = 0.0;
  double loss_total = 0.0;
  double loss_path = 0.0;
  double loss_exp = 0.0;
};

struct TrainOptions {
  int epochs = 30;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Loss log written here when non-empty.
  std::filesystem::path loss_csv;
  /// Called after every optimizer step.
  std::function<void(const LossRecord&)> on_step;
};

struct TrainResult {
  Model model;
  std::vector<LossRecord> log;
};

/// Adam on batches of whole maps, eps drawn per batch from the config range.
/// Deterministic given the seed, whatever the thread count.
TrainResult train(const data::Split& split, Shape grid, int tile, const NwaConfig& config,
                  const TrainOptions& options);

/// Variant dispatch on config.variant; identical to train().
TrainResult run_variant(const data::Split& split, Shape grid, int tile, const NwaConfig& config,
                        const TrainOptions& options);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& log);

}  // namespace nwa

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nwa/datagen.hpp"
#include "nwa/pipeline.hpp"

namespace nwa::eval {

/// <W̄, Y> / <W̄, Ȳ> under the ground-truth costs.
double cost_ratio(const CostField& gt_costs, const Mask& y_pred, const Mask& y_gt);

inline int expanded_nodes(const Mask& e) { return e.cast<int>().sum(); }

struct InstanceResult {
  double cost_ratio = 0.0;
  int expanded = 0;
};

/// Metrics for the sample's own source.
InstanceResult instance_metrics(const Model& model, const data::MapSample& sample, double eps);

struct GeneralizedResult {
  Cell source;
  double cost_ratio = 0.0;
  int expanded = 0;
};

/// Draws a fresh source for the sample's target under `rule`, plans from it
/// and divides by the oracle optimum for that source.
GeneralizedResult generalized_metrics(const Model& model, const data::MapSample& sample,
                                      const data::SamplingRule& rule, double eps, std::mt19937_64& rng);

struct MetricRow {
  std::string variant;
  double eps = 0.0;
  double cost_ratio_mean = 0.0, cost_ratio_std = 0.0;
  double gen_cost_ratio_mean = 0.0, gen_cost_ratio_std = 0.0;
  double expanded_mean = 0.0, expanded_std = 0.0;
  double gen_expanded_mean = 0.0, gen_expanded_std = 0.0;
  int n_instances = 0;
  int n_restarts = 0;
};

struct InstanceRecord {
  std::string variant;
  int restart = 0;
  int instance_id = 0;
  double eps = 0.0;
  double cr = 0.0;
  double en = 0.0;
  double gen_cr = 0.0;
  double gen_en = 0.0;
};

struct SweepResult {
  std::vector<MetricRow> rows;
  std::vector<InstanceRecord> instances;
};

/// Evaluates every model on `test` at every eps. Models sharing a variant are
/// treated as restarts of one experiment: statistics are mean and sample std
/// across restarts of the per-restart means (across instances when a variant
/// has a single model). One random source per instance, drawn from a stream
/// keyed by (seed, instance), so every eps and restart sees the same draw.
SweepResult epsilon_sweep(const std::vector<Model>& models, const data::Split& test,
                          const data::SamplingRule& rule, const std::vector<double>& eps_list,
                          std::uint64_t seed, int threads = 1);

/// Long format: variant,eps,metric,mean,std,n.
std::string sweep_csv(const std::vector<MetricRow>& rows);
/// variant,restart,instance_id,eps,cr,en,gen_cr,gen_en.
std::string instance_csv(const std::vector<InstanceRecord>& records);

}  // namespace nwa::eval

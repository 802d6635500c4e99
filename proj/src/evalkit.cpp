#include "nwa/evalkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "nwa/parallel.hpp"

namespace nwa::eval {
namespace {

std::uint64_t instance_seed(std::uint64_t seed, int instance) {
  std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(instance) + 1));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

// Per-instance metrics of one model at every eps, eps-major.
std::vector<InstanceRecord> run_model(const Model& model, const data::Split& test, const data::SamplingRule& rule,
                                      const std::vector<double>& eps_list, std::uint64_t seed, int threads) {
  const int n = static_cast<int>(test.size());
  const std::size_t n_eps = eps_list.size();
  std::vector<InstanceRecord> out(n_eps * n);
  parallel_for(n, threads, [&](int i) {
    const data::MapSample sample = test.sample(i);
    const Prediction pred = predict(model, sample.image(), sample.source, sample.target);
    std::mt19937_64 rng(instance_seed(seed, i));
    const Cell gen_source = data::resample_source(rule, sample.gt_costs(), sample.target, rng);
    const Prediction gen_pred = predict(model, sample.image(), gen_source, sample.target);
    const Mask gen_opt = dijkstra_oracle(sample.gt_costs(), gen_source, sample.target).path_mask;
    for (std::size_t k = 0; k < n_eps; ++k) {
      const double eps = eps_list[k];
      const SearchResult<double> res = plan(model, pred, sample.source, sample.target, eps);
      const SearchResult<double> gen = plan(model, gen_pred, gen_source, sample.target, eps);
      InstanceRecord& r = out[k * n + i];
      r.variant = to_string(model.config.variant);
      r.instance_id = i;
      r.eps = eps;
      r.cr = cost_ratio(sample.gt_costs(), res.path_mask, sample.gt_path);
      r.en = expanded_nodes(res.expansions);
      r.gen_cr = cost_ratio(sample.gt_costs(), gen.path_mask, gen_opt);
      r.gen_en = expanded_nodes(gen.expansions);
    }
  });
  return out;
}

}  // namespace

double cost_ratio(const CostField& gt_costs, const Mask& y_pred, const Mask& y_gt) {
  const Shape shape = shape_of(gt_costs);
  if (shape_of(y_pred) != shape || shape_of(y_gt) != shape) throw std::invalid_argument("cost_ratio: shape mismatch");
  const double denom = path_cost(gt_costs, y_gt);
  if (!(denom > 0.0)) throw std::invalid_argument("cost_ratio: reference path has zero cost");
  return path_cost(gt_costs, y_pred) / denom;
}

InstanceResult instance_metrics(const Model& model, const data::MapSample& sample, double eps) {
  const SearchResult<double> res = infer(model, sample.image(), sample.source, sample.target, eps);
  return {cost_ratio(sample.gt_costs(), res.path_mask, sample.gt_path), expanded_nodes(res.expansions)};
}

GeneralizedResult generalized_metrics(const Model& model, const data::MapSample& sample,
                                      const data::SamplingRule& rule, double eps, std::mt19937_64& rng) {
  GeneralizedResult g;
  g.source = data::resample_source(rule, sample.gt_costs(), sample.target, rng);
  const SearchResult<double> res = infer(model, sample.image(), g.source, sample.target, eps);
  const Mask opt = dijkstra_oracle(sample.gt_costs(), g.source, sample.target).path_mask;
  g.cost_ratio = cost_ratio(sample.gt_costs(), res.path_mask, opt);
  g.expanded = expanded_nodes(res.expansions);
  return g;
}

SweepResult epsilon_sweep(const std::vector<Model>& models, const data::Split& test,
                          const data::SamplingRule& rule, const std::vector<double>& eps_list,
                          std::uint64_t seed, int threads) {
  if (models.empty()) throw std::invalid_argument("epsilon_sweep: no models");
  if (test.size() == 0) throw std::invalid_argument("epsilon_sweep: empty test split");
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    if (eps_list[k] < 0.0 || (k > 0 && eps_list[k] < eps_list[k - 1])) {
      throw std::invalid_argument("epsilon_sweep: eps list must be non-negative and non-decreasing");
    }
  }
  const Shape grid = shape_of(test.maps.front()->costs);
  const int image_side = test.maps.front()->image.height;
  for (const Model& m : models) {
    if (m.grid != grid || m.grid.height * m.tile != image_side) {
      throw std::invalid_argument("checkpoint grid " + to_string(m.grid) + " (tile " + std::to_string(m.tile) +
                                  ") incompatible with dataset grid " + to_string(grid));
    }
  }

  // Variants in order of first appearance, each with its restarts.
  std::vector<std::pair<Variant, std::vector<const Model*>>> groups;
  for (const Model& m : models) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == m.config.variant; });
    if (it == groups.end()) {
      groups.push_back({m.config.variant, {&m}});
    } else {
      it->second.push_back(&m);
    }
  }

  SweepResult result;
  const int n = static_cast<int>(test.size());
  for (const auto& [variant, restarts] : groups) {
    std::vector<std::vector<InstanceRecord>> per_restart;
    for (std::size_t r = 0; r < restarts.size(); ++r) {
      per_restart.push_back(run_model(*restarts[r], test, rule, eps_list, seed, threads));
      for (InstanceRecord& rec : per_restart.back()) {
        rec.restart = static_cast<int>(r);
        result.instances.push_back(rec);
      }
    }
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
      std::vector<double> cr, gcr, en, gen;
      auto collect = [&](const InstanceRecord* first, int count) {
        std::vector<double> a, b, c, d;
        for (int i = 0; i < count; ++i) {
          a.push_back(first[i].cr);
          b.push_back(first[i].gen_cr);
          c.push_back(first[i].en);
          d.push_back(first[i].gen_en);
        }
        return std::array<std::vector<double>, 4>{a, b, c, d};
      };
      if (restarts.size() == 1) {
        auto v = collect(&per_restart[0][k * n], n);
        cr = v[0], gcr = v[1], en = v[2], gen = v[3];
      } else {
        for (const auto& recs : per_restart) {
          auto v = collect(&recs[k * n], n);
          cr.push_back(stats(v[0]).mean);
          gcr.push_back(stats(v[1]).mean);
          en.push_back(stats(v[2]).mean);
          gen.push_back(stats(v[3]).mean);
        }
      }
      MetricRow row;
      row.variant = to_string(variant);
      row.eps = eps_list[k];
      auto put = [](const std::vector<double>& v, double& mean, double& sd) {
        const Stats st = stats(v);
        mean = st.mean;
        sd = st.std;
      };
      put(cr, row.cost_ratio_mean, row.cost_ratio_std);
      put(gcr, row.gen_cost_ratio_mean, row.gen_cost_ratio_std);
      put(en, row.expanded_mean, row.expanded_std);
      put(gen, row.gen_expanded_mean, row.gen_expanded_std);
      row.n_instances = n;
      row.n_restarts = static_cast<int>(restarts.size());
      result.rows.push_back(row);
    }
  }
  return result;
}

std::string sweep_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "variant,eps,metric,mean,std,n\n";
  for (const MetricRow& r : rows) {
    const int n = r.n_restarts > 1 ? r.n_restarts : r.n_instances;
    auto line = [&](const char* metric, double mean, double sd) {
      out << r.variant << ',' << r.eps << ',' << metric << ',' << mean << ',' << sd << ',' << n << '\n';
    };
    line("cost_ratio", r.cost_ratio_mean, r.cost_ratio_std);
    line("gen_cost_ratio", r.gen_cost_ratio_mean, r.gen_cost_ratio_std);
    line("expanded_nodes", r.expanded_mean, r.expanded_std);
    line("gen_expanded_nodes", r.gen_expanded_mean, r.gen_expanded_std);
  }
  return out.str();
}

std::string instance_csv(const std::vector<InstanceRecord>& records) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "variant,restart,instance_id,eps,cr,en,gen_cr,gen_en\n";
  for (const InstanceRecord& r : records) {
    out << r.variant << ',' << r.restart << ',' << r.instance_id << ',' << r.eps << ',' << r.cr << ',' << r.en
        << ',' << r.gen_cr << ',' << r.gen_en << '\n';
  }
  return out.str();
}

}  // namespace nwa::eval

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nwa/evalkit.hpp"

using namespace nwa;

namespace {

const data::Dataset& dataset() {
  static const data::Dataset d = [] {
    data::DatasetConfig c;
    c.tile = 2;
    c.n_train = 1;
    c.n_val = 1;
    c.n_test = 5;
    c.seed = 31;
    return data::generate_dataset(c);
  }();
  return d;
}

Model model(Variant v, std::uint64_t seed) {
  NwaConfig c;
  c.variant = v;
  c.widths = {4, 8, 8};
  return make_model(c, {12, 12}, 2, seed);
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(CostRatio, Examples) {
  CostField w = CostField::Ones(3, 3);
  w(0, 1) = 3.0;
  Mask opt = Mask::Zero(3, 3), pred = Mask::Zero(3, 3);
  opt(0, 0) = opt(1, 1) = opt(0, 2) = 1;   // 1 + 1 + 1
  pred(0, 0) = pred(0, 1) = pred(0, 2) = 1;  // 1 + 3 + 1
  EXPECT_DOUBLE_EQ(eval::cost_ratio(w, opt, opt), 1.0);
  EXPECT_DOUBLE_EQ(eval::cost_ratio(w, pred, opt), 5.0 / 3.0);
  EXPECT_THROW(eval::cost_ratio(w, Mask::Zero(3, 3), Mask::Zero(3, 3)), std::invalid_argument);
  EXPECT_THROW(eval::cost_ratio(w, Mask::Zero(2, 3), opt), std::invalid_argument);
  EXPECT_EQ(eval::expanded_nodes(opt), 3);
}

TEST(Sweep, LayoutAndCounts) {
  const auto& d = dataset();
  const std::vector<double> eps{0.0, 1.0, 4.0};
  const auto r = eval::epsilon_sweep({model(Variant::NWA, 1), model(Variant::BBA, 1)}, d.test, d.manifest.rule, eps, 3);
  ASSERT_EQ(r.rows.size(), 2u * eps.size());
  EXPECT_EQ(r.instances.size(), 2u * eps.size() * d.test.size());
  const auto csv = lines(eval::sweep_csv(r.rows));
  ASSERT_EQ(csv.size(), 1u + 4u * r.rows.size());
  EXPECT_EQ(csv.front(), "variant,eps,metric,mean,std,n");
  EXPECT_EQ(csv[1].rfind("nwa,0,cost_ratio,", 0), 0u) << csv[1];
  EXPECT_EQ(csv[1].substr(csv[1].rfind(',') + 1), std::to_string(d.test.size()));
  for (const auto& row : r.rows) {
    EXPECT_GE(row.cost_ratio_mean, 1.0 - 1e-12);
    EXPECT_GE(row.gen_cost_ratio_mean, 1.0 - 1e-12);
    EXPECT_GT(row.expanded_mean, 0.0);
  }
  // BBA ignores eps.
  EXPECT_EQ(r.rows[3].expanded_mean, r.rows[5].expanded_mean);
  const auto inst = lines(eval::instance_csv(r.instances));
  EXPECT_EQ(inst.size(), 1u + r.instances.size());
}

TEST(Sweep, StatisticsAcrossRestarts) {
  const auto& d = dataset();
  const std::vector<double> eps{0.0, 2.0};
  const auto r = eval::epsilon_sweep({model(Variant::NWA, 1), model(Variant::NWA, 2), model(Variant::NWA, 3)}, d.test,
                                     d.manifest.rule, eps, 5);
  ASSERT_EQ(r.rows.size(), 2u);
  const std::size_t n = d.test.size();
  for (std::size_t k = 0; k < eps.size(); ++k) {
    std::vector<double> means;
    for (int restart = 0; restart < 3; ++restart) {
      double sum = 0.0;
      for (const auto& rec : r.instances)
        if (rec.restart == restart && rec.eps == eps[k]) sum += rec.en;
      means.push_back(sum / n);
    }
    const double mean = (means[0] + means[1] + means[2]) / 3.0;
    double ss = 0.0;
    for (double m : means) ss += (m - mean) * (m - mean);
    EXPECT_NEAR(r.rows[k].expanded_mean, mean, 1e-12);
    EXPECT_NEAR(r.rows[k].expanded_std, std::sqrt(ss / 2.0), 1e-12);
    EXPECT_EQ(r.rows[k].n_restarts, 3);
  }
  EXPECT_NE(eval::sweep_csv(r.rows).find(",3\n"), std::string::npos);
}

TEST(Sweep, ReproducibleAcrossRunsAndThreads) {
  const auto& d = dataset();
  const std::vector<Model> models{model(Variant::NWA, 4), model(Variant::NA, 4)};
  const auto a = eval::epsilon_sweep(models, d.test, d.manifest.rule, {0, 9}, 11, 1);
  const auto b = eval::epsilon_sweep(models, d.test, d.manifest.rule, {0, 9}, 11, 3);
  EXPECT_EQ(eval::sweep_csv(a.rows), eval::sweep_csv(b.rows));
  EXPECT_EQ(eval::instance_csv(a.instances), eval::instance_csv(b.instances));
  const auto c = eval::epsilon_sweep(models, d.test, d.manifest.rule, {0, 9}, 12, 1);
  EXPECT_NE(eval::instance_csv(a.instances), eval::instance_csv(c.instances));
}

TEST(Sweep, RandomSourceIsSharedAcrossEps) {
  const auto& d = dataset();
  const auto r = eval::epsilon_sweep({model(Variant::BBA, 1)}, d.test, d.manifest.rule, {0, 5}, 2);
  const std::size_t n = d.test.size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(r.instances[i].gen_cr, r.instances[n + i].gen_cr);
    EXPECT_EQ(r.instances[i].gen_en, r.instances[n + i].gen_en);
  }
}

TEST(Sweep, Errors) {
  const auto& d = dataset();
  const Model m = model(Variant::NWA, 1);
  EXPECT_THROW(eval::epsilon_sweep({}, d.test, d.manifest.rule, {0}, 1), std::invalid_argument);
  EXPECT_THROW(eval::epsilon_sweep({m}, d.test, d.manifest.rule, {4, 1}, 1), std::invalid_argument);
  EXPECT_THROW(eval::epsilon_sweep({m}, d.test, d.manifest.rule, {-1}, 1), std::invalid_argument);
  NwaConfig c;
  c.widths = {4, 8, 8};
  const Model other = make_model(c, {10, 10}, 2, 1);
  EXPECT_THROW(eval::epsilon_sweep({other}, d.test, d.manifest.rule, {0}, 1), std::invalid_argument);
}

TEST(Metrics, GeneralizedUsesResampledSource) {
  const auto& d = dataset();
  const Model m = model(Variant::BBA, 1);
  std::mt19937_64 rng(1);
  const data::MapSample s = d.test.sample(0);
  const auto g = eval::generalized_metrics(m, s, d.manifest.rule, 0.0, rng);
  EXPECT_TRUE(data::satisfies_rule(d.manifest.rule, s.gt_costs(), g.source, s.target));
  EXPECT_GE(g.cost_ratio, 1.0 - 1e-12);
  const auto own = eval::instance_metrics(m, s, 0.0);
  EXPECT_GE(own.cost_ratio, 1.0 - 1e-12);
  EXPECT_GT(own.expanded, 0);
}

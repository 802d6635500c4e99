// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "nwa/evalkit.hpp"
#include "nwa/io.hpp"
#include "nwa/nn/encoder.hpp"
#include "nwa/nn/grad_check.hpp"
#include "nwa/nn/ops.hpp"
#include "oracles.hpp"

using namespace nwa;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-3;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int threads() { return std::max(1u, std::thread::hardware_concurrency()); }

Eigen::VectorXd flat(const CostField& f) { return Eigen::Map<const Eigen::VectorXd>(f.data(), f.size()); }
CostField unflat(const Eigen::VectorXd& v, Shape s) { return Eigen::Map<const CostField>(v.data(), s.height, s.width); }

nn::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (Eigen::Index i = 0; i < t.numel(); ++i) t.data()[i] = u(rng);
  return t;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome astar_matches_oracle() {
  std::mt19937_64 rng(101);
  int bad = 0;
  for (int it = 0; it < 500; ++it) {
    const int h = std::uniform_int_distribution<int>(4, 16)(rng), w = std::uniform_int_distribution<int>(4, 16)(rng);
    const CostField c = oracle::random_costs(rng, h, w);
    const auto [s, t] = oracle::random_endpoints(rng, h, w);
    const auto r = astar(c, h_chebyshev(c.minCoeff(), t, {h, w}), s, t);
    if (r.total_cost != oracle::dijkstra_cost(c, s, t)) ++bad;
  }
  return {bad == 0, std::to_string(bad) + "/500 mismatches"};
}

Outcome weighted_bound() {
  std::mt19937_64 rng(102);
  int bad = 0, checked = 0;
  double worst = 0.0;
  for (int it = 0; it < 500; ++it) {
    const int h = std::uniform_int_distribution<int>(4, 16)(rng), w = std::uniform_int_distribution<int>(4, 16)(rng);
    const CostField c = oracle::random_costs(rng, h, w);
    const auto [s, t] = oracle::random_endpoints(rng, h, w);
    const double opt = oracle::dijkstra_cost(c, s, t);
    const auto hc = h_chebyshev(c.minCoeff(), t, {h, w});
    for (double eps : {0.0, 0.5, 1.0, 4.0, 9.0, 14.0}) {
      const auto r = weighted_astar(c, hc, eps, s, t);
      const double cost = path_cost(c, r.path_mask);
      worst = std::max(worst, cost / opt);
      if (cost > (1.0 + eps) * opt + 1e-9) ++bad;
      ++checked;
    }
  }
  return {bad == 0, std::to_string(bad) + "/" + std::to_string(checked) + " violations, worst ratio " + fmt("%.4f", worst)};
}

Outcome enumeration() {
  std::mt19937_64 rng(103);
  int bad = 0;
  for (int it = 0; it < 100; ++it) {
    const CostField c = oracle::random_costs(rng, 4, 4);
    const auto [s, t] = oracle::random_endpoints(rng, 4, 4);
    const double enumerated = oracle::min_simple_path_cost(c, s, t);
    if (std::abs(dijkstra_oracle(c, s, t).total_cost - enumerated) > 1e-9) ++bad;
  }
  return {bad == 0, std::to_string(bad) + "/100 mismatches"};
}

Outcome gradients() {
  std::mt19937_64 rng(104);
  double worst = 0.0;
  std::string worst_name;
  const auto note = [&](const std::string& name, const nn::GradCheckReport& r) {
    if (r.max_rel_error > worst || worst_name.empty()) {
      worst = std::max(worst, r.max_rel_error);
      worst_name = name;
    }
  };
  const auto dot = [](const nn::Tensor& a, const nn::Tensor& b) { return a.values().dot(b.values()); };

  // Convolution, each stride, w.r.t. input, kernel and bias.
  for (int stride : {1, 2}) {
    nn::ConvLayer l(2, 3, 3, stride);
    l.kernel = random_tensor(l.kernel.shape(), rng);
    l.bias = random_tensor(l.bias.shape(), rng);
    const nn::Tensor x = random_tensor({2, 6, 6}, rng);
    const nn::Tensor probe = random_tensor(nn::conv2d_forward(x, l).shape(), rng);
    note("conv/x", nn::grad_check([&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
           const nn::Tensor xv(x.shape(), v);
           if (g) *g = nn::conv2d_backward(xv, l, probe).input.values();
           return dot(probe, nn::conv2d_forward(xv, l));
         }, x.values()));
    note("conv/k", nn::grad_check([&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
           nn::ConvLayer lv = l;
           lv.kernel.values() = v;
           if (g) *g = nn::conv2d_backward(x, lv, probe, false).kernel.values();
           return dot(probe, nn::conv2d_forward(x, lv));
         }, l.kernel.values()));
    note("conv/b", nn::grad_check([&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
           nn::ConvLayer lv = l;
           lv.bias.values() = v;
           if (g) *g = nn::conv2d_backward(x, lv, probe, false).bias.values();
           return dot(probe, nn::conv2d_forward(x, lv));
         }, l.bias.values()));
  }

  // Pointwise and pooling ops.
  using Fwd = std::function<nn::Tensor(const nn::Tensor&)>;
  using Bwd = std::function<nn::Tensor(const nn::Tensor& x, const nn::Tensor& y, const nn::Tensor& g)>;
  const std::vector<std::tuple<std::string, Fwd, Bwd>> ops{
      {"relu", nn::relu_forward, [](const nn::Tensor& x, const nn::Tensor&, const nn::Tensor& g) { return nn::relu_backward(x, g); }},
      {"sigmoid", nn::sigmoid_forward, [](const nn::Tensor&, const nn::Tensor& y, const nn::Tensor& g) { return nn::sigmoid_backward(y, g); }},
      {"minmax", [](const nn::Tensor& x) { return nn::minmax_scale(x, 1.0, 10.0); },
       [](const nn::Tensor&, const nn::Tensor&, const nn::Tensor& g) { return nn::minmax_scale_backward(g, 1.0, 10.0); }},
      {"range_normalize", nn::range_normalize,
       [](const nn::Tensor& x, const nn::Tensor&, const nn::Tensor& g) { return nn::range_normalize_backward(x, g); }},
      {"avgpool", [](const nn::Tensor& x) { return nn::avgpool_forward(x, 2); },
       [](const nn::Tensor&, const nn::Tensor&, const nn::Tensor& g) { return nn::avgpool_backward(g, 2); }},
  };
  for (const auto& [name, fwd, bwd] : ops) {
    // Keep relu inputs away from the kink.
    nn::Tensor x = random_tensor({2, 4, 4}, rng);
    for (Eigen::Index i = 0; i < x.numel(); ++i)
      if (std::abs(x.data()[i]) < 0.05) x.data()[i] += 0.1;
    const nn::Tensor probe = random_tensor(fwd(x).shape(), rng);
    note(name, nn::grad_check([&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
           const nn::Tensor xv(x.shape(), v);
           const nn::Tensor y = fwd(xv);
           if (g) *g = bwd(xv, y, probe).values();
           return dot(probe, y);
         }, x.values()));
  }

  // Whole encoders, both heads, with the cost scaling used by the planner.
  for (int tile : {2, 3, 4}) {
    for (bool sigmoid_head : {true, false}) {
      nn::Encoder enc({4, {3, 4, 4}, tile, sigmoid_head});
      enc.init(rng);
      const nn::Tensor x = random_tensor({4, 3 * tile, 3 * tile}, rng, 0.0, 1.0);
      const nn::Tensor probe = random_tensor({1, 3, 3}, rng);
      const auto head = [&](const nn::Tensor& out) {
        return sigmoid_head ? out : nn::minmax_scale(nn::range_normalize(out), 1.0, 10.0);
      };
      const auto head_back = [&](const nn::Tensor& out) {
        return sigmoid_head ? probe : nn::range_normalize_backward(out, nn::minmax_scale_backward(probe, 1.0, 10.0));
      };
      const std::string tag = "encoder/t" + std::to_string(tile) + (sigmoid_head ? "/sigmoid" : "/linear");
      note(tag + "/params", nn::grad_check([&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
             nn::Encoder e = enc;
             e.set_parameters(v);
             nn::Encoder::Cache cache;
             const nn::Tensor out = e.forward(x, &cache);
             if (g) {
               *g = Eigen::VectorXd::Zero(v.size());
               e.backward(cache, head_back(out), *g);
             }
             return dot(probe, head(out));
           }, enc.parameters()));
      note(tag + "/input", nn::grad_check([&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
             const nn::Tensor xv(x.shape(), v);
             nn::Encoder::Cache cache;
             const nn::Tensor out = enc.forward(xv, &cache);
             if (g) {
               Eigen::VectorXd scratch = Eigen::VectorXd::Zero(enc.parameter_count());
               nn::Tensor gi;
               enc.backward(cache, head_back(out), scratch, &gi);
               *g = gi.values();
             }
             return dot(probe, head(out));
           }, x.values()));
    }
  }

  // Neural A* soft backward on 3x3 and 4x4 instances, w.r.t. heuristic and costs.
  for (int it = 0; it < 20; ++it) {
    const int n = 3 + it % 2;
    const Shape shape{n, n};
    const CostField c = oracle::random_costs(rng, n, n);
    const auto [s, t] = oracle::random_endpoints(rng, n, n);
    HeuristicField<double> h = h_chebyshev(1.0, t, shape);
    for (Eigen::Index i = 0; i < h.values.size(); ++i) h.values.data()[i] *= 1.0 + 4.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    const auto na = neural_astar_forward(c, h, s, t, std::sqrt(n));
    CostField up(n, n);
    for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
    note("neural_astar/h", nn::grad_check([&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
           if (g) *g = flat(neural_astar_backward(na.trace, up));
           return (soft_expansion_field(na.trace, unflat(v, shape), c).array() * up.array()).sum();
         }, flat(h.values)));
    note("neural_astar/w", nn::grad_check([&](const Eigen::VectorXd& v, Eigen::VectorXd* g) {
           if (g) *g = flat(neural_astar_cost_backward(na.trace, up));
           return (soft_expansion_field(na.trace, h.values, unflat(v, shape)).array() * up.array()).sum();
         }, flat(c)));
  }
  return {worst < kGradTol, "max rel error " + fmt("%.2e", worst) + " (" + worst_name + ")"};
}

Outcome isolation() {
  data::DatasetConfig dc;
  dc.tile = 2;
  dc.n_train = 2;
  dc.n_val = 1;
  dc.n_test = 1;
  dc.seed = 105;
  const data::Dataset d = data::generate_dataset(dc);
  Outcome out;

  NwaConfig c;
  c.widths = {4, 8, 8};
  c.beta = 0.0;
  const Model m = make_model(c, dc.grid, dc.tile, 5);
  const Eigen::Index n_cost = m.cost_encoder.parameter_count();
  const Eigen::VectorXd p0 = m.parameters();
  double sens = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    const data::MapSample s = d.train.sample(k);
    for (Eigen::Index i = n_cost; i < p0.size(); ++i) {
      Model mp = m, mm = m;
      Eigen::VectorXd p = p0;
      p[i] += 1e-4;
      mp.set_parameters(p);
      p[i] -= 2e-4;
      mm.set_parameters(p);
      sens = std::max(sens, std::abs(forward_train(mp, s, 4.0).loss - forward_train(mm, s, 4.0).loss) / 2e-4);
    }
  }
  out.pass = sens <= 1e-10;
  out.detail = "encoder_h sensitivity " + fmt("%.1e", sens) + " over " + std::to_string(p0.size() - n_cost) + " params";

  // NWA sees neither endpoint; NSNA sees the target but not the source.
  std::mt19937_64 rng(106);
  int differing = 0, probes = 0;
  for (Variant v : {Variant::NWA, Variant::NSNA}) {
    NwaConfig vc;
    vc.variant = v;
    vc.widths = {4, 8, 8};
    const Model mv = make_model(vc, dc.grid, dc.tile, 6);
    const data::MapSample s = d.train.sample(0);
    const CostField ref = predict(mv, s.image(), s.source, s.target).costs;
    for (int k = 0; k < 20; ++k, ++probes) {
      auto [src, tgt] = oracle::random_endpoints(rng, dc.grid.height, dc.grid.width);
      if (v == Variant::NSNA) {
        tgt = s.target;
        while (src == tgt) src = oracle::random_cell(rng, dc.grid.height, dc.grid.width);
      }
      const CostField w = predict(mv, s.image(), src, tgt).costs;
      if (std::memcmp(w.data(), ref.data(), sizeof(double) * w.size()) != 0) ++differing;
    }
  }
  out.pass = out.pass && differing == 0;
  out.detail += ", W differs on " + std::to_string(differing) + "/" + std::to_string(probes) +
                " endpoint changes (NWA: source and target, NSNA: source)";
  return out;
}

Outcome blackbox_structure() {
  std::mt19937_64 rng(107);
  int bad = 0, informative = 0;
  for (int it = 0; it < 100; ++it) {
    const int n = 4 + it % 13;
    const CostField c = oracle::random_costs(rng, n, n);
    const auto [s, t] = oracle::random_endpoints(rng, n, n);
    const auto [y, ctx] = blackbox_forward(c, h_chebyshev(c.minCoeff(), t, {n, n}), s, t);
    const Mask gt = dijkstra_oracle(oracle::random_costs(rng, n, n), s, t).path_mask;
    const CostField up = (1.0 - 2.0 * gt.cast<double>().array()).matrix();
    const CostField g = blackbox_backward(ctx, up);
    const double q = 1.0 / ctx.lambda;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double v = g.data()[i];
      if (v != 0.0 && v != q && v != -q) ++bad;
    }
    if (g.cwiseAbs().maxCoeff() > 0.0) ++informative;
    if (blackbox_backward(ctx, CostField::Zero(n, n)).cwiseAbs().maxCoeff() != 0.0) ++bad;
  }
  return {bad == 0 && informative > 0,
          std::to_string(bad) + " bad entries, " + std::to_string(informative) + "/100 instances with nonzero gradient"};
}

// ---------------------------------------------------------------------------

const data::Dataset& easy_dataset() {
  static const data::Dataset d = data::generate_dataset(data::DatasetConfig{}, threads());
  return d;
}

Model train_model(Variant v, std::uint64_t seed) {
  const auto& d = easy_dataset();
  NwaConfig c;
  c.variant = v;
  TrainOptions o;
  o.epochs = 30;
  o.seed = seed;
  o.threads = threads();
  const auto t0 = std::chrono::steady_clock::now();
  Model m = train(d.train, d.manifest.config.grid, d.manifest.config.tile, c, o).model;
  std::printf("    trained %s seed %llu in %.0f s\n", to_string(v).c_str(), static_cast<unsigned long long>(seed),
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::fflush(stdout);
  return m;
}

std::vector<eval::MetricRow> sweep(const Model& m, const std::vector<double>& eps) {
  const auto& d = easy_dataset();
  return eval::epsilon_sweep({m}, d.test, d.manifest.rule, eps, 7, threads()).rows;
}

Outcome desk_learning() {
  bool decreasing = true;
  double cr0 = 0.0, cr14 = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto rows = sweep(train_model(Variant::NWA, seed), {0, 4, 14});
    std::printf("    nwa seed %llu: CR %.3f %.3f %.3f  EN %.2f %.2f %.2f\n", static_cast<unsigned long long>(seed),
                rows[0].cost_ratio_mean, rows[1].cost_ratio_mean, rows[2].cost_ratio_mean, rows[0].expanded_mean,
                rows[1].expanded_mean, rows[2].expanded_mean);
    decreasing = decreasing && rows[0].expanded_mean > rows[1].expanded_mean &&
                 rows[1].expanded_mean > rows[2].expanded_mean;
    cr0 += rows[0].cost_ratio_mean / 3.0;
    cr14 += rows[2].cost_ratio_mean / 3.0;
  }
  return {cr0 <= 1.05 && cr14 <= 1.35 && decreasing,
          fmt("CR(0) %.3f <= 1.05, CR(14) %.3f <= 1.35, EN strictly decreasing on every seed: ", cr0, cr14) +
              (decreasing ? "yes" : "no")};
}

Outcome variant_ordering() {
  int agree = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto bba = sweep(train_model(Variant::BBA, seed), {0}).front();
    const auto na = sweep(train_model(Variant::NA, seed), {0}).front();
    const bool ok = bba.cost_ratio_mean <= na.cost_ratio_mean && na.expanded_mean <= bba.expanded_mean;
    std::printf("    seed %llu: BBA CR %.3f EN %.2f | NA CR %.3f EN %.2f -> %s\n", static_cast<unsigned long long>(seed),
                bba.cost_ratio_mean, bba.expanded_mean, na.cost_ratio_mean, na.expanded_mean, ok ? "ok" : "no");
    agree += ok;
  }
  return {agree >= 2, std::to_string(agree) + "/3 seeds ordered"};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("nwa_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  std::vector<std::string> failures;
  const auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  data::DatasetConfig dc;
  dc.tile = 2;
  dc.n_train = 6;
  dc.n_val = 1;
  dc.n_test = 4;
  dc.seed = 109;
  data::Dataset a = data::generate_dataset(dc, 1);
  data::Dataset b = data::generate_dataset(dc, threads() + 1);
  data::save_dataset(root / "a", a);
  data::save_dataset(root / "b", b);
  data::Dataset loaded = data::load_dataset(root / "a");
  data::save_dataset(root / "c", loaded);
  for (const auto& f : a.manifest.files) {
    const std::string bytes = io::read_file(root / "a" / f.path);
    check(bytes == io::read_file(root / "b" / f.path), "dataset bytes " + f.path);
    check(bytes == io::read_file(root / "c" / f.path), "dataset round trip " + f.path);
  }
  check(io::read_file(root / "a" / "manifest.json") == io::read_file(root / "c" / "manifest.json"), "manifest round trip");

  NwaConfig c;
  c.widths = {4, 8, 8};
  c.batch = 4;
  TrainOptions o;
  o.epochs = 2;
  o.seed = 3;
  o.threads = 1;
  const TrainResult t1 = train(loaded.train, dc.grid, dc.tile, c, o);
  o.threads = threads() + 1;
  const TrainResult t2 = train(a.train, dc.grid, dc.tile, c, o);
  check(model_hash(t1.model) == model_hash(t2.model), "training hash");
  save_model(root / "m.ckpt", t1.model);
  const Model back = load_model(root / "m.ckpt");
  check(back.parameters() == t1.model.parameters() && model_hash(back) == model_hash(t1.model), "checkpoint round trip");

  const auto e1 = eval::epsilon_sweep({t1.model}, a.test, a.manifest.rule, {0, 4}, 9, 1);
  const auto e2 = eval::epsilon_sweep({back}, loaded.test, loaded.manifest.rule, {0, 4}, 9, threads() + 1);
  check(eval::sweep_csv(e1.rows) == eval::sweep_csv(e2.rows), "eval csv");
  check(eval::instance_csv(e1.instances) == eval::instance_csv(e2.instances), "instance csv");
  fs::remove_all(root);

  std::string detail = failures.empty() ? "dataset, training, eval and round trips byte-identical" : "differs:";
  for (const auto& f : failures) detail += " " + f + ";";
  return {failures.empty(), detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: unbounded
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {1, "A* with H_C matches Dijkstra oracle", 10, astar_matches_oracle},
      {2, "weighted A* suboptimality bound", 30, weighted_bound},
      {3, "Dijkstra matches simple-path enumeration", 60, enumeration},
      {4, "finite-difference gradient checks", 0, gradients},
      {5, "gradient isolation and target-agnostic costs", 0, isolation},
      {6, "black-box backward structure", 0, blackbox_structure},
      {7, "desk-scale learning (NWA, 3 seeds)", 1800, desk_learning},
      {8, "variant ordering BBA vs NA", 0, variant_ordering},
      {9, "determinism and persistence", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt(" (over budget %.0f s)", c.budget_s);
    }
    std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

// Acceptance gate: one pass/fail line per criterion, exit code = failure count.
//
// 1 gradient fidelity        5 classification sanity (extended suite, not here)
// 2 basis properties         6 safe-subsampling closed form
// 3 patch fitting            7 eRF growth with training scale
// 4 sigma tracks input scale 8 CLI determinism
//
// Criteria 4 and 7 share the same trained models; together they dominate the
// runtime (a few minutes of single-core training).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "njet/basis.hpp"
#include "njet/data.hpp"
#include "njet/fit.hpp"
#include "njet/gradcheck.hpp"
#include "njet/nn/network.hpp"
#include "njet/resample.hpp"
#include "njet/rng.hpp"
#include "njet/train.hpp"

using namespace njet;

namespace {

struct Outcome {
  int id;
  std::string label;
  bool pass;
  std::string detail;
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

Outcome criterion_gradients() {
  auto t0 = std::chrono::steady_clock::now();
  auto results = run_gradchecks(7);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : results) {
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_name = r.name;
    }
  }
  double secs = elapsed_s(t0);
  bool pass = worst < 1e-5 && secs < 60.0;
  return {1, "gradient fidelity", pass,
          fmt("%zu checks, worst rel err %.3g (%s), %.1fs", results.size(), worst,
              worst_name.c_str(), secs)};
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion_basis() {
  std::string why;
  bool pass = true;

  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    BasisSpec spec;
    spec.order = 4;
    spec.sigma = sigma;
    spec.extent_k = 2.0;
    auto stack = sample_basis(spec);
    const int s = stack.size;
    const int half = (s - 1) / 2;

    std::vector<double> order_peak(std::size_t(spec.order) + 1, 0.0);
    for (Index m = 0; m < stack.count(); ++m) {
      auto [i, j] = stack.index_map[m];
      double l1 = stack.filters.row(m).cwiseAbs().sum();
      double peak = stack.filters.row(m).cwiseAbs().maxCoeff();
      order_peak[std::size_t(i + j)] = std::max(order_peak[std::size_t(i + j)], peak);

      if ((i + j) % 2 == 1 && std::abs(stack.filters.row(m).sum()) > 1e-12 * l1) {
        pass = false;
        why += fmt(" odd-sum(m=%d,sigma=%g)", int(m), sigma);
      }

      // separability: every sample is the product of the two 1D stencils
      double norm = std::pow(sigma, i + j);
      auto f = stack.filter(m);
      for (int y = 0; y < s && pass; ++y)
        for (int x = 0; x < s; ++x) {
          double want = norm * gauss_deriv_1d(j, double(y - half), sigma) *
                        gauss_deriv_1d(i, double(x - half), sigma);
          if (std::abs(f(y, x) - want) > 1e-13 * (1.0 + std::abs(want))) {
            pass = false;
            why += fmt(" separability(m=%d,sigma=%g)", int(m), sigma);
            break;
          }
        }
    }

    // per-order strongest response, compared across orders (Fig. 4 summary)
    double hi_peak = 0.0, lo_peak = 1e300;
    for (double p : order_peak) {
      hi_peak = std::max(hi_peak, p);
      lo_peak = std::min(lo_peak, p);
    }
    double ratio = hi_peak / lo_peak;
    if (!(ratio <= 25.0)) {
      pass = false;
      why += fmt(" magnitude-ratio %.2f at sigma=%g", ratio, sigma);
    }
  }

  BasisSpec blur;
  blur.order = 0;
  blur.sigma = 1.0;
  blur.extent_k = 4.0;
  double sum = sample_basis(blur).filters.row(0).sum();
  if (std::abs(sum - 0.9999940394918844) > 1e-12 || std::abs(sum - 1.0) >= 2e-4) {
    pass = false;
    why += fmt(" order-0 sum %.17g", sum);
  }

  return {2, "basis properties", pass,
          pass ? "odd sums, unit DC, separability, magnitude ratio <= 25" : why};
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion_fit() {
  std::string why;
  bool pass = true;
  Rng rng(301);

  // residual monotone in order on 20 random patches
  for (int t = 0; t < 20 && pass; ++t) {
    Image patch;
    patch.channels = 1;
    patch.height = 11;
    patch.width = 11;
    patch.data.resize(121);
    rng.fill_uniform(patch.data, 0.0, 1.0);
    double sigma = rng.uniform(1.0, 3.0);
    double prev = 1e300;
    for (int order = 0; order <= 3; ++order) {
      double res = fit_patch(patch, sigma, order, 2.0).residual;
      if (res > prev + 1e-12) {
        pass = false;
        why += fmt(" monotonicity(order=%d,sigma=%.3f)", order, sigma);
      }
      prev = res;
    }
  }

  // in-span recovery
  {
    BasisSpec spec;
    spec.order = 3;
    spec.sigma = 1.5;
    spec.extent_k = 2.0;
    auto basis = sample_basis(spec);
    for (Index m : {Index(0), Index(4), Index(9)}) {
      Image patch;
      patch.channels = 1;
      patch.height = basis.size;
      patch.width = basis.size;
      patch.data.resize(basis.size * basis.size);
      for (Index i = 0; i < patch.data.size(); ++i)
        patch.data[i] = basis.filters(m, i);
      auto fit = fit_patch(patch, 1.5, 3, 2.0);
      if (fit.residual >= 1e-10) {
        pass = false;
        why += fmt(" in-span residual %.3g (m=%d)", fit.residual, int(m));
      }
      for (Index k = 0; k < basis.count(); ++k) {
        double want = k == m ? 1.0 : 0.0;
        if (std::abs(fit.alphas(0, k) - want) > 1e-6) {
          pass = false;
          why += fmt(" one-hot miss (m=%d)", int(m));
          break;
        }
      }
    }
  }

  // independent dense least-squares oracle
  {
    Image patch;
    patch.channels = 1;
    patch.height = 9;
    patch.width = 9;
    patch.data.resize(81);
    rng.fill_uniform(patch.data, 0.0, 1.0);
    auto fit = fit_patch(patch, 2.0, 3, 2.0);

    BasisSpec spec;
    spec.order = 3;
    spec.sigma = 2.0;
    spec.extent_k = 2.0;
    SampleOptions opts;
    opts.size_override = 9;
    auto basis = sample_basis(spec, opts);
    Eigen::MatrixXd design(81, basis.count());
    for (Index m = 0; m < basis.count(); ++m)
      design.col(m) = basis.filters.row(m).transpose();
    Eigen::VectorXd oracle =
        design.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(patch.data);
    double err = (fit.alphas.row(0).transpose() - oracle).cwiseAbs().maxCoeff();
    double scale = oracle.cwiseAbs().maxCoeff();
    if (err > 1e-8 * std::max(1.0, scale)) {
      pass = false;
      why += fmt(" oracle mismatch %.3g", err);
    }
  }

  return {3, "patch fitting", pass,
          pass ? "monotone residuals, one-hot recovery, SVD oracle agreement" : why};
}

// ----------------------------------------------------------- criteria 4 and 7

struct ScaleRun {
  double sigma = 0.0;
  double erf_m2 = 0.0;
  double accuracy = 0.0;
};

ScaleRun train_at_scale(std::uint64_t seed, double factor) {
  const int image = int(std::lround(28.0 * factor));
  ArchSpec spec;
  spec.arch = "toy";
  spec.order = 4;
  spec.toy_filters = 16;
  spec.extent_k = 2.0;
  spec.image_h = image;
  spec.image_w = image;
  spec.class_count = 2;
  spec.toy_pool = std::max(1, int(std::lround(2.0 * factor)));

  Rng rng(seed);
  auto net = build_network(spec, rng);

  const Index train_n = 768, eval_n = 192;
  auto all = synth_blobs(train_n + eval_n, image, factor, 50000 + seed);
  auto train_set = all.slice(0, train_n);
  auto eval_set = all.slice(train_n, eval_n);

  TrainConfig config;
  config.learning_rate = 0.01;
  config.momentum = 0.9;
  config.epochs = 80;
  config.batch_size = 32;
  // Two-phase schedule: sigma stays frozen until batch norm statistics and the
  // alpha coefficients settle, then descends the landscape those define. Letting
  // sigma move from epoch 1 is seed-fragile — early gradients through an
  // uncalibrated norm can fling it into a far basin it never escapes.
  config.sigma_lr_scale = 0.25;
  config.sigma_warmup_epochs = 15;
  config.seed = seed;

  auto trace = train(net, train_set, eval_set, config, rng);

  ScaleRun out;
  out.sigma = net.njet_layers.at(0)->sigma();
  out.accuracy = trace.rows.empty() ? 0.0 : trace.rows.back().eval_accuracy;

  // eRF at the center of the last spatial map, probed with one eval image
  auto probe = eval_set.batch(0, 1);
  auto fwd = net.forward(probe, false);
  (void)fwd;
  Index last_h = 0, last_w = 0;
  {
    // recover the spatial dims entering the flatten stage
    FeatureMap x = probe;
    for (Index li = 0; li < net.flatten_index; ++li)
      x = net.layers[li]->forward(x, false);
    last_h = x.height;
    last_w = x.width;
  }
  auto map = net.erf_map(probe, last_h / 2, last_w / 2);
  out.erf_m2 = erf_second_moment(map);
  return out;
}

void criteria_scale_tracking(std::vector<Outcome>& results) {
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  const std::vector<double> factors = {1.0, 1.5, 2.0};
  std::map<std::pair<std::uint64_t, int>, ScaleRun> runs;

  auto t0 = std::chrono::steady_clock::now();
  for (auto seed : seeds)
    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      runs[{seed, int(fi)}] = train_at_scale(seed, factors[fi]);
      std::fprintf(stderr,
                   "  [train] seed %llu scale %.1f: sigma %.3f acc %.3f erf-m2 %.1f "
                   "(%.0fs elapsed)\n",
                   static_cast<unsigned long long>(seed), factors[fi],
                   runs[{seed, int(fi)}].sigma, runs[{seed, int(fi)}].accuracy,
                   runs[{seed, int(fi)}].erf_m2, elapsed_s(t0));
    }
  double secs = elapsed_s(t0);

  const double lo = 2.0 / 1.5 - 0.15, hi = 2.0 / 1.5 + 0.15;
  bool pass4 = secs < 45.0 * 60.0;
  std::string detail4;
  double mean15 = 0.0, mean20 = 0.0;
  for (auto seed : seeds) {
    double s10 = runs[{seed, 0}].sigma;
    double s15 = runs[{seed, 1}].sigma;
    double s20 = runs[{seed, 2}].sigma;
    mean15 += s15 / double(seeds.size());
    mean20 += s20 / double(seeds.size());
    bool ordered = s20 > s15 && s15 > s10;
    pass4 = pass4 && ordered;
    detail4 += fmt("%ssd%llu: sigma(1)=%.3f sigma(1.5)=%.3f sigma(2)=%.3f%s",
                   detail4.empty() ? "" : "; ",
                   static_cast<unsigned long long>(seed), s10, s15, s20,
                   ordered ? "" : " [order miss]");
  }
  // Ratio of seed means, matching the paper's (2.0/1.5)*mean(sigma_1.5) vs
  // mean(sigma_2.0) comparison; the per-seed requirement is the ordering.
  double ratio = mean20 / mean15;
  bool in_band = ratio >= lo && ratio <= hi;
  pass4 = pass4 && in_band;
  detail4 += fmt("; mean ratio=%.3f band [%.3f, %.3f]%s, %.0fs", ratio, lo, hi,
                 in_band ? "" : " [band miss]", secs);
  results.push_back({4, "sigma tracks input scale", pass4, detail4});

  bool pass7 = true;
  std::string detail7;
  for (auto seed : seeds) {
    double m1 = runs[{seed, 0}].erf_m2;
    double m2 = runs[{seed, 2}].erf_m2;
    pass7 = pass7 && m2 > m1;
    detail7 += fmt("%ssd%llu: m2(1)=%.1f m2(2)=%.1f", detail7.empty() ? "" : "; ",
                   static_cast<unsigned long long>(seed), m1, m2);
  }
  results.push_back({7, "eRF grows with training scale", pass7, detail7});
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion_safe_size() {
  struct Row {
    int s;
    double sigma, r;
    int expect;
  };
  // frozen by an independent evaluator (max(1, floor(s * 2^(-sigma/r) + 0.5)))
  static const Row table[50] = {
      {68, 0.9013, 4.7828, 60}, {90, 1.1957, 0.5143, 18}, {44, 5.0606, 2.2212, 9},
      {64, 4.0791, 5.5763, 39}, {3, 2.8884, 6.6361, 2},   {83, 0.3928, 1.4399, 69},
      {44, 0.8675, 7.8422, 41}, {66, 6.4266, 3.3789, 18}, {42, 4.9965, 1.7603, 6},
      {26, 2.9006, 6.1575, 19}, {69, 2.3519, 2.9711, 40}, {12, 4.2692, 0.8932, 1},
      {55, 3.1530, 1.9086, 18}, {33, 2.7333, 5.7644, 24}, {65, 1.3407, 3.1482, 48},
      {35, 5.2383, 7.4594, 22}, {33, 4.9425, 1.0511, 1},  {57, 5.9528, 7.1838, 32},
      {37, 4.7332, 0.9033, 1},  {81, 0.3342, 5.2518, 78}, {7, 1.2923, 6.7945, 6},
      {85, 3.5238, 5.8590, 56}, {51, 4.7216, 1.9359, 9},  {45, 6.8144, 4.9235, 17},
      {79, 3.0060, 1.4897, 20}, {55, 5.0169, 2.9639, 17}, {56, 2.1707, 2.9106, 33},
      {22, 5.7972, 5.7944, 11}, {43, 4.6111, 4.4750, 21}, {36, 4.0334, 3.0792, 15},
      {93, 5.7748, 3.0552, 25}, {53, 4.8508, 6.4878, 32}, {82, 3.7931, 5.1726, 49},
      {17, 5.2155, 7.5900, 11}, {78, 6.2849, 0.5010, 1},  {37, 1.7378, 6.7725, 31},
      {15, 6.3088, 4.2240, 5},  {60, 3.1647, 0.6497, 2},  {23, 1.2303, 6.5052, 20},
      {23, 5.6727, 2.3473, 4},  {51, 1.5229, 0.7634, 13}, {93, 7.0737, 4.0783, 28},
      {34, 3.8452, 5.0327, 20}, {25, 4.9524, 1.4843, 2},  {76, 1.3002, 6.6757, 66},
      {6, 3.1825, 1.6647, 2},   {26, 7.1391, 2.6619, 4},  {94, 7.5534, 3.8373, 24},
      {34, 7.8186, 6.5174, 15}, {16, 3.0914, 0.6523, 1}};

  bool pass = true;
  std::string why;
  for (const auto& row : table) {
    int got = safe_size(row.s, row.sigma, {row.r});
    if (got != row.expect) {
      pass = false;
      why += fmt(" (%d,%.4f,%.4f)->%d want %d", row.s, row.sigma, row.r, got,
                 row.expect);
    }
  }

  Rng rng(601);
  for (int t = 0; t < 300; ++t) {
    int s = 1 + int(rng.below(90));
    double sigma = rng.uniform(0.05, 8.0);
    double r = rng.uniform(0.5, 8.0);
    double d = rng.uniform(0.05, 3.0);
    if (safe_size(s, sigma + d, {r}) > safe_size(s, sigma, {r}) ||
        safe_size(s, sigma, {r + d}) < safe_size(s, sigma, {r})) {
      pass = false;
      why += fmt(" monotonicity(s=%d,sigma=%.3f,r=%.3f)", s, sigma, r);
      break;
    }
  }

  return {6, "safe-subsampling closed form", pass,
          pass ? "50 frozen triples exact, monotone over 300-point sweep" : why};
}

// ---------------------------------------------------------------- criterion 8

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_determinism() {
#ifndef NJET_CLI_PATH
  return {8, "CLI determinism", false, "njet binary path not compiled in"};
#else
  const std::string cli = NJET_CLI_PATH;
  const std::string train_flags =
      " train --arch toy --order 2 --data blobs --scale 1 --image-size 20"
      " --train-count 48 --eval-count 16 --epochs 2 --seed 3 --threads 1 --out ";
  bool pass = true;
  std::string why;

  for (const char* base : {"acc8_train_a", "acc8_train_b"}) {
    std::string cmd = cli + train_flags + base + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      pass = false;
      why += fmt(" train run into %s failed", base);
    }
  }
  if (pass) {
    std::string a = slurp("acc8_train_a/sigma_trace.csv");
    std::string b = slurp("acc8_train_b/sigma_trace.csv");
    if (a.empty() || a != b) {
      pass = false;
      why += " sigma_trace.csv differs between identical runs";
    }
  }

  for (const char* base : {"acc8_basis_a", "acc8_basis_b"}) {
    std::string cmd =
        cli + " basis --order 3 --sigma 1.5 --out " + base + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      pass = false;
      why += fmt(" basis run into %s failed", base);
    }
  }
  if (pass) {
    std::string a = slurp("acc8_basis_a/manifest.csv");
    std::string b = slurp("acc8_basis_b/manifest.csv");
    if (a.empty() || a != b) {
      pass = false;
      why += " basis manifest.csv differs between identical runs";
    }
  }

  return {8, "CLI determinism", pass,
          pass ? "byte-identical sigma_trace.csv and manifest.csv across reruns"
               : why};
#endif
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

  std::vector<Outcome> results;
  if (wanted(1)) results.push_back(criterion_gradients());
  if (wanted(2)) results.push_back(criterion_basis());
  if (wanted(3)) results.push_back(criterion_fit());
  if (wanted(6)) results.push_back(criterion_safe_size());
  if (wanted(8)) results.push_back(criterion_determinism());
  if (wanted(4) || wanted(7)) criteria_scale_tracking(results);

  std::sort(results.begin(), results.end(),
            [](const Outcome& a, const Outcome& b) { return a.id < b.id; });

  int failures = 0;
  for (const auto& r : results) {
    if (!only.empty() && !only.count(r.id)) continue;
    std::printf("criterion %d: %s — %s (%s)\n", r.id, r.pass ? "PASS" : "FAIL",
                r.label.c_str(), r.detail.c_str());
    if (!r.pass) ++failures;
  }
  std::printf("criterion 5: SKIP — classification sanity runs in the extended suite "
              "(njet_extended)\n");
  return failures;
}

#include <cmath>

#include "doctest.h"
#include "njet/fit.hpp"
#include "njet/rng.hpp"

using namespace njet;

namespace {

Image random_patch(Index channels, Index size, Rng& rng) {
  Image p;
  p.channels = channels;
  p.height = size;
  p.width = size;
  p.data.resize(channels * size * size);
  rng.fill_uniform(p.data, 0.0, 1.0);
  return p;
}

// Smooth synthetic stand-in for a natural-image patch: a ramp plus two
// Gaussian bumps per channel, different for each channel.
Image smooth_patch(Index size) {
  Image p;
  p.channels = 3;
  p.height = size;
  p.width = size;
  p.data.resize(3 * size * size);
  double c = double(size - 1) / 2.0;
  for (Index ch = 0; ch < 3; ++ch)
    for (Index y = 0; y < size; ++y)
      for (Index x = 0; x < size; ++x) {
        double dy = double(y) - c, dx = double(x) - c;
        double v = 0.3 + 0.05 * double(ch) + 0.04 * dx - 0.03 * dy;
        v += 0.4 * std::exp(-((dy - 1) * (dy - 1) + (dx + 2) * (dx + 2)) / 8.0);
        v += (0.2 + 0.1 * double(ch)) *
             std::exp(-((dy + 2) * (dy + 2) + (dx - 1) * (dx - 1)) / 5.0);
        p.at(ch, y, x) = v;
      }
  return p;
}

}  // namespace

TEST_CASE("fitting a basis filter recovers a one-hot alpha") {
  const double sigma = 1.5;
  const int order = 3;
  BasisSpec spec;
  spec.order = order;
  spec.sigma = sigma;
  spec.extent_k = 2.0;
  auto basis = sample_basis(spec);

  for (Index m : {Index(0), Index(3), Index(7)}) {
    Image patch;
    patch.channels = 1;
    patch.height = basis.size;
    patch.width = basis.size;
    patch.data.resize(basis.size * basis.size);
    for (Index i = 0; i < patch.data.size(); ++i) patch.data[i] = basis.filters(m, i);

    auto fit = fit_patch(patch, sigma, order, 2.0);
    CHECK(fit.residual < 1e-10);
    for (Index k = 0; k < basis.count(); ++k) {
      double want = (k == m) ? 1.0 : 0.0;
      CHECK(fit.alphas(0, k) == doctest::Approx(want).epsilon(1e-8));
    }
  }
}

TEST_CASE("zero patch gives zero alphas and zero residual") {
  Image patch;
  patch.channels = 2;
  patch.height = 9;
  patch.width = 9;
  patch.data = VectorXd::Zero(2 * 81);
  auto fit = fit_patch(patch, 2.0, 2, 2.0);
  CHECK(fit.alphas.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fit.residual < 1e-12);
}

TEST_CASE("fit matches a dense least-squares oracle") {
  Rng rng(101);
  auto patch = random_patch(1, 9, rng);
  const double sigma = 2.0;
  const int order = 3;

  auto fit = fit_patch(patch, sigma, order, 2.0);

  // independent oracle: thin SVD least squares on the same design matrix
  BasisSpec spec;
  spec.order = order;
  spec.sigma = sigma;
  spec.extent_k = 2.0;
  SampleOptions opts;
  opts.size_override = 9;
  auto basis = sample_basis(spec, opts);
  Eigen::MatrixXd design(81, basis.count());
  for (Index m = 0; m < basis.count(); ++m)
    design.col(m) = basis.filters.row(m).transpose();
  Eigen::VectorXd oracle =
      design.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(patch.data);

  for (Index m = 0; m < basis.count(); ++m)
    CHECK(fit.alphas(0, m) == doctest::Approx(oracle[m]).epsilon(1e-8));

  double oracle_res = std::sqrt((design * oracle - patch.data).squaredNorm() / 81.0);
  CHECK(fit.residual == doctest::Approx(oracle_res).epsilon(1e-8));
}

TEST_CASE("residual is monotone non-increasing in order") {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    auto patch = random_patch(1, 11, rng);
    double sigma = rng.uniform(1.0, 3.0);
    double prev = 1e300;
    for (int order = 0; order <= 3; ++order) {
      auto fit = fit_patch(patch, sigma, order, 2.0);
      CHECK(fit.residual <= prev + 1e-12);
      prev = fit.residual;
    }
  }
}

TEST_CASE("projection is idempotent") {
  Rng rng(77);
  auto patch = random_patch(1, 9, rng);
  auto fit1 = fit_patch(patch, 1.8, 2, 2.0);
  auto rec1 = reconstruct(fit1.alphas, 1.8, 2, 2.0, 9);
  auto fit2 = fit_patch(rec1, 1.8, 2, 2.0);
  auto rec2 = reconstruct(fit2.alphas, 1.8, 2, 2.0, 9);
  CHECK((rec1.data - rec2.data).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(fit2.residual < 1e-9);
}

TEST_CASE("reconstruct of zero alphas is a zero patch") {
  RowMatrixXd alphas = RowMatrixXd::Zero(1, 6);
  auto img = reconstruct(alphas, 1.0, 2, 2.0);
  CHECK(img.height == 5);
  CHECK(img.data.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("order-3 fit of a smooth RGB patch beats the best constant fit") {
  auto patch = smooth_patch(11);
  auto fit = fit_patch(patch, 5.0, 3, 2.0);  // sigma much larger than the patch

  // best constant fit per channel = mean; pooled RMS about those means
  double sq = 0.0;
  for (Index ch = 0; ch < 3; ++ch) {
    double mean = 0.0;
    for (Index y = 0; y < 11; ++y)
      for (Index x = 0; x < 11; ++x) mean += patch.at(ch, y, x);
    mean /= 121.0;
    for (Index y = 0; y < 11; ++y)
      for (Index x = 0; x < 11; ++x) {
        double d = patch.at(ch, y, x) - mean;
        sq += d * d;
      }
  }
  double const_rms = std::sqrt(sq / (3.0 * 121.0));
  CHECK(fit.residual < const_rms);
}

TEST_CASE("border_ignore excludes frame pixels from the fit") {
  Rng rng(13);
  auto patch = random_patch(1, 9, rng);
  // poison the frame: a huge border should not perturb a border-ignoring fit
  Image spiked = patch;
  for (Index y = 0; y < 9; ++y)
    for (Index x = 0; x < 9; ++x)
      if (y == 0 || y == 8 || x == 0 || x == 8) spiked.at(0, y, x) = 50.0;

  auto clean = fit_patch(patch, 1.5, 2, 2.0, 1);
  auto spiky = fit_patch(spiked, 1.5, 2, 2.0, 1);
  CHECK((clean.alphas - spiky.alphas).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(clean.residual == doctest::Approx(spiky.residual).epsilon(1e-10));

  auto noisy = fit_patch(spiked, 1.5, 2, 2.0, 0);
  CHECK((clean.alphas - noisy.alphas).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("fit validates patch geometry") {
  Image even;
  even.channels = 1;
  even.height = 8;
  even.width = 8;
  even.data = VectorXd::Zero(64);
  CHECK_THROWS_AS(fit_patch(even, 1.0, 2, 2.0), std::invalid_argument);

  Image rect;
  rect.channels = 1;
  rect.height = 9;
  rect.width = 7;
  rect.data = VectorXd::Zero(63);
  CHECK_THROWS_AS(fit_patch(rect, 1.0, 2, 2.0), std::invalid_argument);

  Image ok;
  ok.channels = 1;
  ok.height = 5;
  ok.width = 5;
  ok.data = VectorXd::Zero(25);
  CHECK_THROWS_AS(fit_patch(ok, 1.0, 2, 2.0, 3), std::invalid_argument);
}

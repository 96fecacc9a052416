#include <cmath>

#include "doctest.h"
#include "njet/resample.hpp"
#include "njet/rng.hpp"

using namespace njet;

TEST_CASE("safe_size frozen examples") {
  CHECK(safe_size(32, 4.0, {4.0}) == 16);
  CHECK(safe_size(32, 1e-9, {4.0}) == 32);
  // 28 * 2^{-0.5} = 19.799 -> 20
  CHECK(safe_size(28, 2.0, {4.0}) == 20);
  CHECK(safe_size(1, 50.0, {1.0}) == 1);  // floor at 1
  CHECK_THROWS_AS(safe_size(0, 1.0, {4.0}), std::invalid_argument);
  CHECK_THROWS_AS(safe_size(8, -1.0, {4.0}), std::invalid_argument);
  CHECK_THROWS_AS(safe_size(8, 1.0, {0.0}), std::invalid_argument);
}

TEST_CASE("safe_size monotone in sigma and r") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    int s = 1 + int(rng.below(80));
    double sigma = rng.uniform(0.05, 8.0);
    double r = rng.uniform(0.5, 8.0);
    double d = rng.uniform(0.1, 2.0);
    // non-increasing in sigma
    CHECK(safe_size(s, sigma + d, {r}) <= safe_size(s, sigma, {r}));
    // non-decreasing in r
    CHECK(safe_size(s, sigma, {r + d}) >= safe_size(s, sigma, {r}));
  }
}

TEST_CASE("downsample averages exactly on divisible grids") {
  FeatureMap in(1, 1, 4, 4);
  for (Index y = 0; y < 4; ++y)
    for (Index x = 0; x < 4; ++x) in.at(0, 0, y, x) = double((y + x) % 2);
  auto out = downsample(in, 2, 2);
  REQUIRE(out.height == 2);
  REQUIRE(out.width == 2);
  for (Index y = 0; y < 2; ++y)
    for (Index x = 0; x < 2; ++x) CHECK(out.at(0, 0, y, x) == doctest::Approx(0.5));

  FeatureMap cnst(2, 3, 6, 6);
  cnst.data.setConstant(0.37);
  auto c2 = downsample(cnst, 3, 2);
  CHECK((c2.data.array() - 0.37).abs().maxCoeff() < 1e-15);
}

TEST_CASE("downsample matches a rectangle-overlap oracle on fractional ratios") {
  Rng rng(17);
  FeatureMap in(1, 1, 6, 6);
  rng.fill_uniform(in.data, 0.0, 1.0);
  auto out = downsample(in, 4, 4);
  // independent oracle: integrate the piecewise-constant source over each
  // output cell of extent 1.5 source pixels
  const double step = 6.0 / 4.0;
  for (Index oy = 0; oy < 4; ++oy) {
    for (Index ox = 0; ox < 4; ++ox) {
      double acc = 0.0;
      for (Index sy = 0; sy < 6; ++sy) {
        double wy = std::min<double>(double(sy + 1), (oy + 1) * step) -
                    std::max<double>(double(sy), oy * step);
        if (wy <= 0) continue;
        for (Index sx = 0; sx < 6; ++sx) {
          double wx = std::min<double>(double(sx + 1), (ox + 1) * step) -
                      std::max<double>(double(sx), ox * step);
          if (wx <= 0) continue;
          acc += wy * wx * in.at(0, 0, sy, sx);
        }
      }
      CHECK(out.at(0, 0, oy, ox) == doctest::Approx(acc / (step * step)).epsilon(1e-12));
    }
  }
}

TEST_CASE("downsample 1D fractional oracle") {
  FeatureMap in(1, 1, 1, 3);
  in.at(0, 0, 0, 0) = 1.0;
  in.at(0, 0, 0, 1) = 2.0;
  in.at(0, 0, 0, 2) = 4.0;
  auto out = downsample(in, 1, 2);
  CHECK(out.at(0, 0, 0, 0) == doctest::Approx(2.0 / 1.5).epsilon(1e-14));
  CHECK(out.at(0, 0, 0, 1) == doctest::Approx(5.0 / 1.5).epsilon(1e-14));
}

TEST_CASE("downsample preserves the mean when dims divide") {
  Rng rng(3);
  FeatureMap in(2, 2, 8, 12);
  rng.fill_uniform(in.data, -1.0, 1.0);
  auto out = downsample(in, 4, 4);
  for (Index b = 0; b < 2; ++b)
    for (Index c = 0; c < 2; ++c)
      CHECK(out.plane(b, c).mean() ==
            doctest::Approx(in.plane(b, c).mean()).epsilon(1e-13));
}

TEST_CASE("downsample_backward is the adjoint of downsample") {
  Rng rng(29);
  FeatureMap x(1, 2, 7, 5);
  rng.fill_uniform(x.data, -1.0, 1.0);
  auto y = downsample(x, 4, 3);
  FeatureMap u = FeatureMap::zeros_like(y);
  rng.fill_uniform(u.data, -1.0, 1.0);
  auto xt = downsample_backward(u, 7, 5);
  REQUIRE(xt.same_shape(x));
  double lhs = y.data.dot(u.data);
  double rhs = x.data.dot(xt.data);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("downsample rejects upsampling targets") {
  FeatureMap in(1, 1, 4, 4);
  CHECK_THROWS_AS(downsample(in, 5, 4), std::invalid_argument);
  CHECK_THROWS_AS(downsample(in, 4, 0), std::invalid_argument);
}

TEST_CASE("resize_bilinear identity and frozen 2x2 -> 3x3") {
  Image img;
  img.channels = 1;
  img.height = 2;
  img.width = 2;
  img.data.resize(4);
  img.data << 0.0, 1.0, 2.0, 3.0;

  auto same = resize_bilinear(img, 1.0);
  CHECK((same.data - img.data).cwiseAbs().maxCoeff() == 0.0);

  auto up = resize_bilinear(img, 1.5);
  REQUIRE(up.height == 3);
  REQUIRE(up.width == 3);
  // frozen half-pixel-center oracle
  double want[9] = {0.0, 0.5, 1.0, 1.0, 1.5, 2.0, 2.0, 2.5, 3.0};
  for (Index i = 0; i < 9; ++i)
    CHECK(up.data[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("resize_bilinear ramp stays separable at factor 2") {
  Image img;
  img.channels = 1;
  img.height = 2;
  img.width = 2;
  img.data.resize(4);
  img.data << 0.0, 1.0, 0.0, 1.0;
  auto up = resize_bilinear(img, 2.0);
  REQUIRE(up.height == 4);
  for (Index y = 1; y < 4; ++y)
    for (Index x = 0; x < 4; ++x)
      CHECK(up.at(0, y, x) == doctest::Approx(up.at(0, 0, x)).epsilon(1e-14));
  for (Index y = 0; y < 4; ++y)
    for (Index x = 1; x < 4; ++x) CHECK(up.at(0, y, x) >= up.at(0, y, x - 1));
}

TEST_CASE("resize_bilinear factor 4 scales delta mass by ~16") {
  Image img;
  img.channels = 1;
  img.height = 9;
  img.width = 9;
  img.data = VectorXd::Zero(81);
  img.at(0, 4, 4) = 1.0;
  auto up = resize_bilinear(img, 4.0);
  double mass = up.data.sum();
  CHECK(std::abs(mass - 16.0) < 16.0 * 0.05);
}

TEST_CASE("resize_bilinear rejects degenerate outputs") {
  Image img;
  img.channels = 1;
  img.height = 2;
  img.width = 2;
  img.data = VectorXd::Zero(4);
  CHECK_THROWS_AS(resize_bilinear(img, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(resize_bilinear(img, -1.0), std::invalid_argument);
}

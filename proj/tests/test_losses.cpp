// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dr3d/losses.hpp"
#include "testutil.hpp"

using namespace dr3d;

TEST_CASE("adversarial loss values and limits") {
  CHECK(adv_loss_d(0.0, 0.0) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(adv_loss_g(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Confident-correct discriminator drives its loss toward zero.
  CHECK(adv_loss_d(30.0, -30.0) < 1e-12);
  // Generator loss decreases monotonically in the fake logit.
  double prev = adv_loss_g(-5.0);
  for (double f = -4.5; f < 5.0; f += 0.5) {
    const double cur = adv_loss_g(f);
    CHECK(cur < prev);
    prev = cur;
  }
  // Stability far into the tails.
  CHECK(std::isfinite(adv_loss_d(-800.0, 800.0)));
  CHECK(adv_loss_d(-800.0, 800.0) == doctest::Approx(1600.0).epsilon(1e-9));
}

TEST_CASE("adversarial loss gradients match finite differences") {
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    double v = x;
    CHECK(testutil::check_grad(&v, adv_loss_g_grad(x), [&]() { return adv_loss_g(v); }));
    CHECK(testutil::check_grad(&v, adv_loss_d_grad_fake(x),
                               [&]() { return adv_loss_d(0.4, v); }));
    CHECK(testutil::check_grad(&v, adv_loss_d_grad_real(x),
                               [&]() { return adv_loss_d(v, 0.4); }));
  }
}

TEST_CASE("depth similarity: zero, offset, shape errors") {
  Rng rng(61);
  Mat d1(20, 20);
  for (int i = 0; i < d1.size(); ++i) d1.data()[i] = 2.0 + 0.3 * rng.normal();
  DepthBlurSpec spec;
  CHECK(depth_similarity(d1, d1, spec) == 0.0);

  // Blur preserves constants, so a constant offset passes straight through.
  const Mat d2 = d1.array() + 0.25;
  CHECK(depth_similarity(d1, d2, spec) == doctest::Approx(0.0625).epsilon(1e-6));

  Mat wrong(10, 20);
  CHECK_THROWS_AS(depth_similarity(d1, wrong, spec), ConfigError);
}

TEST_CASE("depth similarity of a checkerboard difference is tiny") {
  // Unit-amplitude checkerboard: sigma-5 blur nearly annihilates Nyquist.
  const int n = 24;
  Mat base = Mat::Constant(n, n, 2.0), other = base;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) other(y, x) += ((x + y) % 2 == 0) ? 1.0 : -1.0;
  DepthBlurSpec spec;
  const double loss = depth_similarity(base, other, spec);

  // Independent direct-convolution oracle with the same reflect-101 border.
  auto reflect = [&](int i) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
  };
  double S = 0.0;
  for (int i = -7; i <= 7; ++i)
    for (int j = -7; j <= 7; ++j) S += std::exp(-(i * i + j * j) / 50.0);
  double acc = 0.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double b = 0.0;
      for (int i = -7; i <= 7; ++i)
        for (int j = -7; j <= 7; ++j) {
          const int yy = reflect(y + i), xx = reflect(x + j);
          const double cb = ((xx + yy) % 2 == 0) ? 1.0 : -1.0;
          b += std::exp(-(i * i + j * j) / 50.0) / S * cb;
        }
      acc += b * b;
    }
  const double oracle = acc / (n * n);
  CHECK(loss == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(loss < 1e-3);
}

TEST_CASE("depth similarity gradient matches finite differences") {
  Rng rng(62);
  Mat d1(9, 9), d2(9, 9);
  for (int i = 0; i < d1.size(); ++i) d1.data()[i] = 2.0 + 0.2 * rng.normal();
  for (int i = 0; i < d2.size(); ++i) d2.data()[i] = 2.0 + 0.2 * rng.normal();
  DepthBlurSpec spec;
  Mat g1;
  depth_similarity(d1, d2, spec, &g1);
  auto loss = [&]() { return depth_similarity(d1, d2, spec); };
  for (int i = 0; i < d1.size(); i += 4)
    CHECK(testutil::check_grad(&d1.data()[i], g1.data()[i], loss, 1e-6));
}

TEST_CASE("normal smoothness: constants, linear slope, flip symmetry") {
  Tensor flat(3, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) flat.at(2, y, x) = 1.0;
  CHECK(normal_smoothness(flat) == 0.0);

  // One component varying linearly along x with slope s: every interior
  // x-step contributes s^2; there are h*(w-1) such steps.
  const double s = 0.12;
  Tensor lin(3, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) lin.at(0, y, x) = s * x;
  const double expect = s * s * 8.0 * 7.0 / 64.0;
  CHECK(normal_smoothness(lin) == doctest::Approx(expect).epsilon(1e-12));

  Rng rng(63);
  Tensor nmap(3, 8, 8);
  for (Eigen::Index i = 0; i < nmap.data.size(); ++i) nmap.data[i] = rng.normal();
  CHECK(normal_smoothness(nmap) ==
        doctest::Approx(normal_smoothness(flip_horizontal(nmap))).epsilon(1e-12));
}

TEST_CASE("normal smoothness gradient matches finite differences") {
  Rng rng(64);
  Tensor nmap(3, 6, 6);
  for (Eigen::Index i = 0; i < nmap.data.size(); ++i) nmap.data[i] = rng.normal();
  Tensor gn;
  normal_smoothness(nmap, &gn);
  auto loss = [&]() { return normal_smoothness(nmap); };
  for (Eigen::Index i = 0; i < nmap.data.size(); i += 5)
    CHECK(testutil::check_grad(&nmap.data[i], gn.data[i], loss));
}

TEST_CASE("pose loss arithmetic and gradient") {
  using V2 = Eigen::Vector2d;
  CHECK(pose_loss({V2(0, 0)}, {V2(0.1, 0)}) == doctest::Approx(0.01).epsilon(1e-12));
  // Batch of two with per-item squared errors 0.01 and 0.03.
  const double l = pose_loss({V2(0, 0), V2(0, 0)},
                             {V2(0.1, 0), V2(std::sqrt(0.03), 0)});
  CHECK(l == doctest::Approx(0.02).epsilon(1e-12));
  CHECK_THROWS_AS(pose_loss({}, {}), ConfigError);
  CHECK_THROWS_AS(pose_loss({V2(0, 0)}, {V2(0, 0), V2(0, 0)}), ConfigError);

  std::vector<V2> target{V2(0.1, -0.2), V2(-0.3, 0.05)};
  std::vector<V2> pred{V2(0.2, 0.1), V2(0.0, -0.1)};
  std::vector<V2> gpred;
  pose_loss(target, pred, &gpred);
  auto loss = [&]() { return pose_loss(target, pred); };
  for (std::size_t i = 0; i < pred.size(); ++i) {
    CHECK(testutil::check_grad(&pred[i].x(), gpred[i].x(), loss));
    CHECK(testutil::check_grad(&pred[i].y(), gpred[i].y(), loss));
  }
}

TEST_CASE("geometric loss is the stated weighted sum") {
  GeometricWeights w{0.5, 2.0, 3.0};
  CHECK(geometric_loss(w, 1.0, 1.0, 1.0) == doctest::Approx(5.5).epsilon(1e-12));
  w.alpha = 0.0;
  CHECK(geometric_loss(w, 123.0, 0.0, 0.0) == 0.0);
  CHECK(geometric_loss(GeometricWeights{1, 1, 1}, 0.1, 0.2, 0.3) ==
        doctest::Approx(0.6).epsilon(1e-12));
}

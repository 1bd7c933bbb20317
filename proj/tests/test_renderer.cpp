// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dr3d/renderer.hpp"
#include "testutil.hpp"

using namespace dr3d;

namespace {

TriPlane random_triplane(int res, int channels, double extent, Rng& rng,
                         double scale = 1.0) {
  TriPlane tp(res, channels, extent);
  for (auto& p : tp.planes)
    for (Eigen::Index i = 0; i < p.data.size(); ++i)
      p.data[i] = scale * rng.normal();
  return tp;
}

// Decoder with zero weights: density and color are bias-only constants.
Decoder constant_decoder(int channels, double density_raw, double color_raw) {
  Decoder dec;
  Rng rng(1);
  dec.init(channels, 8, rng);
  dec.fc0.W.setZero();
  dec.fc0.b.setZero();
  dec.fc1.W.setZero();
  dec.fc1.b.setZero();
  dec.fc2.W.setZero();
  dec.fc2.b.setZero();
  dec.fc2.b(0, 0) = density_raw;
  dec.fc2.b(1, 0) = color_raw;
  dec.fc2.b(2, 0) = color_raw;
  dec.fc2.b(3, 0) = color_raw;
  return dec;
}

}  // namespace

TEST_CASE("zero density composites to black with depth = far") {
  const int n = 16;
  Vec sigma = Vec::Zero(n);
  Mat rgb = Mat::Constant(n, 3, 0.7);
  Vec ts(n), deltas(n);
  for (int i = 0; i < n; ++i) ts[i] = 1.0 + 0.1 * i;
  for (int i = 0; i + 1 < n; ++i) deltas[i] = ts[i + 1] - ts[i];
  deltas[n - 1] = 3.0 - ts[n - 1];
  const CompositeResult r = composite_ray(sigma, rgb, ts, deltas, 3.0);
  CHECK(r.color.norm() == 0.0);
  CHECK(r.opacity == 0.0);
  CHECK(r.depth == 3.0);
}

TEST_CASE("homogeneous medium matches c*(1-exp(-s*L)) at 64 samples") {
  // Constant field via bias-only decoder; interval closure makes the
  // transmittance product collapse to exp(-s*(far-near)) exactly.
  const double density_raw = 0.35;
  const double s = softplus(density_raw);
  const double color_raw = 0.4;
  const double c = sigmoid(color_raw);
  TriPlane tp(8, 4, 1.0);
  const Decoder dec = constant_decoder(4, density_raw, color_raw);
  RenderParams rp;
  rp.h = rp.w = 8;
  rp.n_samples = 64;
  rp.near = 0.9;
  rp.far = 4.5;
  const RenderOutput out = render(tp, dec, CameraPose{}, rp, 77);
  const double L = rp.far - rp.near;
  const double expect = c * (1.0 - std::exp(-s * L));
  for (int y = 0; y < rp.h; ++y)
    for (int x = 0; x < rp.w; ++x) {
      for (int ch = 0; ch < 3; ++ch)
        CHECK(testutil::rel_err(out.image.at(ch, y, x), expect) < 0.01);
      CHECK(testutil::rel_err(out.opacity(y, x), 1.0 - std::exp(-s * L)) < 0.01);
      CHECK(out.depth(y, x) > rp.near);
      CHECK(out.depth(y, x) < rp.far);
    }
}

TEST_CASE("weight sum equals 1 - exp(-sum sigma*delta) per ray") {
  Rng rng(21);
  TriPlane tp = random_triplane(8, 4, 1.0, rng, 0.5);
  Decoder dec;
  Rng drng(22);
  dec.init(4, 12, drng);
  dec.fc2.b(0, 0) = 1.0;  // boost density so opacity is non-trivial
  RenderParams rp;
  rp.h = rp.w = 8;
  rp.n_samples = 24;
  RenderTrace tr;
  const RenderOutput out = render(tp, dec, CameraPose{}, rp, 5, &tr);
  for (int p = 0; p < rp.h * rp.w; ++p) {
    double wsum = 0.0, tau = 0.0;
    for (int i = 0; i < rp.n_samples; ++i) {
      wsum += tr.weight[std::size_t(p) * rp.n_samples + i];
      tau += tr.sigma[std::size_t(p) * rp.n_samples + i] *
             tr.deltas[std::size_t(p) * rp.n_samples + i];
    }
    CHECK(std::abs(wsum - (1.0 - std::exp(-tau))) < 1e-5);
    CHECK(std::abs(wsum - out.opacity(p / rp.w, p % rp.w)) < 1e-12);
  }
}

TEST_CASE("raising any sample density never lowers opacity") {
  Rng rng(23);
  const int n = 12;
  Vec ts(n), deltas(n);
  for (int i = 0; i < n; ++i) ts[i] = 1.0 + 0.2 * i;
  for (int i = 0; i + 1 < n; ++i) deltas[i] = ts[i + 1] - ts[i];
  deltas[n - 1] = 0.2;
  Mat rgb = Mat::Constant(n, 3, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    Vec sigma(n);
    for (int i = 0; i < n; ++i) sigma[i] = std::abs(rng.normal());
    const double base = composite_ray(sigma, rgb, ts, deltas, 4.0).opacity;
    const int k = int(rng.index(n));
    sigma[k] += rng.uniform(0.0, 2.0);
    const double bumped = composite_ray(sigma, rgb, ts, deltas, 4.0).opacity;
    CHECK(bumped >= base - 1e-15);
  }
}

TEST_CASE("render is bit-deterministic in the stratification seed") {
  Rng rng(24);
  TriPlane tp = random_triplane(8, 4, 1.0, rng, 0.3);
  Decoder dec;
  Rng drng(25);
  dec.init(4, 12, drng);
  RenderParams rp;
  rp.h = rp.w = 6;
  rp.n_samples = 8;
  const RenderOutput a = render(tp, dec, CameraPose{}, rp, 123);
  const RenderOutput b = render(tp, dec, CameraPose{}, rp, 123);
  const RenderOutput c = render(tp, dec, CameraPose{}, rp, 124);
  CHECK(a.image.data == b.image.data);
  CHECK(a.depth == b.depth);
  CHECK(a.image.data != c.image.data);
}

TEST_CASE("render gradients match finite differences") {
  Rng rng(26);
  TriPlane tp = random_triplane(4, 3, 1.0, rng, 0.4);
  Decoder dec;
  Rng drng(27);
  dec.init(3, 8, drng);
  dec.fc2.b(0, 0) = 0.5;
  RenderParams rp;
  rp.h = rp.w = 4;
  rp.n_samples = 6;
  const std::uint64_t seed = 99;

  // Random linear functional over image, depth and opacity.
  Tensor gimg(3, rp.h, rp.w);
  Mat gdep(rp.h, rp.w), gop(rp.h, rp.w);
  Rng grng(28);
  for (Eigen::Index i = 0; i < gimg.data.size(); ++i) gimg.data[i] = grng.normal();
  for (int i = 0; i < gdep.size(); ++i) gdep.data()[i] = grng.normal();
  for (int i = 0; i < gop.size(); ++i) gop.data()[i] = grng.normal();

  auto loss = [&]() {
    const RenderOutput out = render(tp, dec, CameraPose{}, rp, seed);
    double l = out.image.data.dot(gimg.data);
    l += (out.depth.array() * gdep.array()).sum();
    l += (out.opacity.array() * gop.array()).sum();
    return l;
  };

  RenderTrace tr;
  render(tp, dec, CameraPose{}, rp, seed, &tr);
  Tensor pg[3] = {Tensor(3, 4, 4), Tensor(3, 4, 4), Tensor(3, 4, 4)};
  render_backward(tp, dec, tr, gimg, gdep, gop, pg);

  int checked = 0, failed = 0;
  for (int k = 0; k < 3; ++k)
    for (Eigen::Index i = 0; i < pg[k].data.size(); i += 3) {
      if (std::abs(pg[k].data[i]) < 1e-9) continue;
      if (!testutil::check_grad(&tp.planes[k].data[i], pg[k].data[i], loss)) ++failed;
      ++checked;
    }
  for (Eigen::Index i = 0; i < dec.fc0.W.size(); i += 5) {
    if (!testutil::check_grad(&dec.fc0.W.data()[i], dec.fc0.gW.data()[i], loss)) ++failed;
    ++checked;
  }
  for (Eigen::Index i = 0; i < dec.fc2.W.size(); i += 3) {
    if (!testutil::check_grad(&dec.fc2.W.data()[i], dec.fc2.gW.data()[i], loss)) ++failed;
    ++checked;
  }
  for (Eigen::Index i = 0; i < dec.fc2.b.size(); ++i) {
    if (!testutil::check_grad(&dec.fc2.b.data()[i], dec.fc2.gb.data()[i], loss)) ++failed;
    ++checked;
  }
  CHECK(checked > 40);
  CHECK(failed == 0);
}

TEST_CASE("fronto-parallel depth map yields (0,0,1) normals") {
  CameraPose pose;
  const int hw = 9;
  Mat depth(hw, hw);
  // Plane z_cam = -D: ray distance D / -dir.z per pixel.
  const double D = 2.0;
  for (int iy = 0; iy < hw; ++iy)
    for (int ix = 0; ix < hw; ++ix)
      depth(iy, ix) = D / -pixel_dir_camera(pose, hw, hw, iy, ix).z();
  const NormalsResult res = normals_from_depth(depth, pose);
  for (int iy = 0; iy < hw; ++iy)
    for (int ix = 0; ix < hw; ++ix) {
      CHECK(std::abs(res.n.at(0, iy, ix)) < 1e-9);
      CHECK(std::abs(res.n.at(1, iy, ix)) < 1e-9);
      CHECK(res.n.at(2, iy, ix) == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(res.degenerate[std::size_t(iy) * hw + ix] == 0);
    }
}

TEST_CASE("slanted plane normals match the analytic direction") {
  CameraPose pose;
  pose.fov = 0.5;
  const int hw = 9;
  const double a = 0.3, D = 2.0;  // plane z = a*x - D in camera space
  Mat depth(hw, hw);
  for (int iy = 0; iy < hw; ++iy)
    for (int ix = 0; ix < hw; ++ix) {
      const Eigen::Vector3d d = pixel_dir_camera(pose, hw, hw, iy, ix);
      depth(iy, ix) = -D / (d.z() - a * d.x());
    }
  const NormalsResult res = normals_from_depth(depth, pose);
  const Eigen::Vector3d want = Eigen::Vector3d(-a, 0, 1).normalized();
  for (int iy = 0; iy < hw; ++iy)
    for (int ix = 0; ix < hw; ++ix) {
      const Eigen::Vector3d got(res.n.at(0, iy, ix), res.n.at(1, iy, ix),
                                res.n.at(2, iy, ix));
      CHECK((got - want).norm() < 1e-9);
    }
}

TEST_CASE("degenerate cross products are flagged and pinned to (0,0,1)") {
  CameraPose pose;
  const Mat depth = Mat::Zero(5, 5);  // all points collapse to the center
  const NormalsResult res = normals_from_depth(depth, pose);
  for (int i = 0; i < 25; ++i) CHECK(res.degenerate[std::size_t(i)] == 1);
  CHECK(res.n.at(2, 2, 2) == 1.0);
}

TEST_CASE("normals backward matches finite differences") {
  CameraPose pose;
  pose.fov = 0.6;
  const int hw = 6;
  Rng rng(31);
  Mat depth(hw, hw);
  for (int iy = 0; iy < hw; ++iy)
    for (int ix = 0; ix < hw; ++ix) depth(iy, ix) = 2.0 + 0.15 * rng.normal();
  Tensor gn(3, hw, hw);
  for (Eigen::Index i = 0; i < gn.data.size(); ++i) gn.data[i] = rng.normal();

  auto loss = [&]() {
    const NormalsResult r = normals_from_depth(depth, pose);
    return r.n.data.dot(gn.data);
  };
  const Mat gdepth = normals_from_depth_backward(depth, pose, gn);
  for (int i = 0; i < depth.size(); ++i)
    CHECK(testutil::check_grad(&depth.data()[i], gdepth.data()[i], loss, 1e-6));
}

TEST_CASE("blur kernel: normalization, impulse response, center value") {
  const Mat k = gaussian_kernel(15, 5.0);
  CHECK(std::abs(k.sum() - 1.0) < 1e-6);

  // Independent direct summation for the center coefficient.
  double S = 0.0;
  for (int i = -7; i <= 7; ++i)
    for (int j = -7; j <= 7; ++j) S += std::exp(-(i * i + j * j) / 50.0);
  CHECK(k(7, 7) == doctest::Approx(1.0 / S).epsilon(1e-12));

  // Centered unit impulse on a large map reproduces the kernel.
  Mat m = Mat::Zero(41, 41);
  m(20, 20) = 1.0;
  const Mat blurred = gaussian_blur(m, 15, 5.0);
  for (int i = -7; i <= 7; ++i)
    for (int j = -7; j <= 7; ++j)
      CHECK(blurred(20 + i, 20 + j) == doctest::Approx(k(i + 7, j + 7)).epsilon(1e-12));

  CHECK_THROWS_AS(gaussian_kernel(14, 5.0), ConfigError);
}

TEST_CASE("blur preserves constants and has a true adjoint") {
  const Mat c = Mat::Constant(10, 12, 3.25);
  const Mat bc = gaussian_blur(c, 15, 5.0);
  CHECK((bc.array() - 3.25).abs().maxCoeff() < 1e-12);

  Rng rng(33);
  Mat x(9, 9), y(9, 9);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (int i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
  const double lhs = (gaussian_blur(x, 15, 5.0).array() * y.array()).sum();
  const double rhs = (x.array() * gaussian_blur_adjoint(y, 15, 5.0).array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dr3d/triplane.hpp"
#include "testutil.hpp"

using namespace dr3d;

namespace {

TriPlane random_triplane(int res, int channels, double extent, Rng& rng) {
  TriPlane tp(res, channels, extent);
  for (auto& p : tp.planes)
    for (Eigen::Index i = 0; i < p.data.size(); ++i) p.data[i] = rng.normal();
  return tp;
}

}  // namespace

TEST_CASE("constant planes sum their three values everywhere") {
  TriPlane tp(8, 4, 1.0);
  for (int k = 0; k < 3; ++k) tp.planes[k].data.setConstant(k + 1.0);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Mat feat = sample_features(tp, {p});
    for (int c = 0; c < 4; ++c) CHECK(feat(0, c) == doctest::Approx(6.0).epsilon(1e-12));
  }
}

TEST_CASE("midpoint between two texels bilinearly averages them") {
  // res 3, extent 1: texels at coords -1, 0, 1 along each plane axis.
  TriPlane tp(3, 1, 1.0);
  tp.planes[1].data.setZero();
  tp.planes[2].data.setZero();
  Tensor& xy = tp.planes[0];
  xy.data.setZero();
  xy.at(0, 1, 1) = 2.0;  // (x=0, y=0)
  xy.at(0, 1, 2) = 4.0;  // (x=1, y=0)
  // Query halfway: x = 0.5, y = 0, z = 0. XZ/YZ contribute zero.
  const Mat feat = sample_features(tp, {Eigen::Vector3d(0.5, 0.0, 0.0)});
  CHECK(feat(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("coordinates outside the volume clamp to the border") {
  Rng rng(4);
  TriPlane tp = random_triplane(8, 3, 1.0, rng);
  const Mat inside = sample_features(tp, {Eigen::Vector3d(1.0, 1.0, 1.0)});
  const Mat outside = sample_features(tp, {Eigen::Vector3d(5.0, 5.0, 5.0)});
  CHECK((inside - outside).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sampling is linear along a segment inside one cell") {
  Rng rng(5);
  TriPlane tp = random_triplane(8, 3, 1.0, rng);
  // Segment along x inside one cell: res-8 grid lines sit at odd multiples
  // of 1/7, so (0.16, 0.40) stays between 1/7 and 3/7.
  const Eigen::Vector3d a(0.16, 0.1, -0.2), b(0.40, 0.1, -0.2);
  const Eigen::Vector3d m = 0.5 * (a + b);
  const Mat fa = sample_features(tp, {a});
  const Mat fb = sample_features(tp, {b});
  const Mat fm = sample_features(tp, {m});
  CHECK((fm - 0.5 * (fa + fb)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("decoder outputs are in range and deterministic") {
  Rng rng(6);
  TriPlane tp = random_triplane(8, 6, 1.0, rng);
  Decoder dec;
  Rng drng(7);
  dec.init(6, 16, drng);
  Rng prng(8);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d p(prng.uniform(-1, 1), prng.uniform(-1, 1),
                            prng.uniform(-1, 1));
    double s1, s2;
    Eigen::Vector3d c1, c2;
    field_query(tp, dec, p, s1, c1);
    field_query(tp, dec, p, s2, c2);
    CHECK(s1 == s2);
    CHECK(c1 == c2);
    CHECK(s1 >= 0.0);
    for (int k = 0; k < 3; ++k) {
      CHECK(c1[k] > 0.0);
      CHECK(c1[k] < 1.0);
    }
  }
}

TEST_CASE("field_query equals decode of sample_features") {
  Rng rng(9);
  TriPlane tp = random_triplane(8, 6, 1.0, rng);
  Decoder dec;
  Rng drng(10);
  dec.init(6, 16, drng);
  Rng prng(11);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d p(prng.uniform(-1.5, 1.5), prng.uniform(-1.5, 1.5),
                            prng.uniform(-1.5, 1.5));
    double s;
    Eigen::Vector3d c;
    field_query(tp, dec, p, s, c);
    Vec sig;
    Mat rgb;
    dec.forward(sample_features(tp, {p}), sig, rgb);
    CHECK(s == sig[0]);
    CHECK(c.x() == rgb(0, 0));
  }
}

TEST_CASE("zero planes through a zeroed decoder give softplus(0) density") {
  TriPlane tp(8, 6, 1.0);
  Decoder dec;
  Rng drng(12);
  dec.init(6, 16, drng);
  dec.fc0.W.setZero();
  dec.fc0.b.setZero();
  dec.fc1.W.setZero();
  dec.fc1.b.setZero();
  dec.fc2.W.setZero();
  dec.fc2.b.setZero();
  double s;
  Eigen::Vector3d c;
  field_query(tp, dec, Eigen::Vector3d(0.1, -0.2, 0.3), s, c);
  CHECK(s == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Default init keeps the density bias at -1: near-empty field.
  Decoder dec2;
  Rng drng2(13);
  dec2.init(6, 16, drng2);
  dec2.fc0.W.setZero();
  dec2.fc1.W.setZero();
  dec2.fc2.W.setZero();
  dec2.fc0.b.setZero();
  dec2.fc1.b.setZero();
  dec2.fc2.b.setZero();
  dec2.fc2.b(0, 0) = -1.0;
  field_query(tp, dec2, Eigen::Vector3d::Zero(), s, c);
  CHECK(s == doctest::Approx(softplus(-1.0)).epsilon(1e-12));
}

TEST_CASE("density gradient w.r.t. a plane texel matches finite differences") {
  Rng rng(14);
  TriPlane tp = random_triplane(8, 4, 1.0, rng);
  Decoder dec;
  Rng drng(15);
  dec.init(4, 12, drng);

  const Eigen::Vector3d p(0.31, -0.12, 0.45);
  auto loss = [&]() {
    double s;
    Eigen::Vector3d c;
    field_query(tp, dec, p, s, c);
    return s + 0.5 * c.sum();
  };

  // Analytic: decoder backward to features, then scatter to planes.
  std::vector<BilinearTap> taps;
  const Mat feat = sample_features(tp, {p}, &taps);
  Vec sig;
  Mat rgb;
  Decoder::Trace tr;
  dec.forward(feat, sig, rgb, &tr);
  Vec dsig = Vec::Constant(1, 1.0);
  Mat drgb = Mat::Constant(1, 3, 0.5);
  const Mat dfeat = dec.backward(tr, dsig, drgb);
  Tensor grads[3] = {Tensor(4, 8, 8), Tensor(4, 8, 8), Tensor(4, 8, 8)};
  sample_features_backward(tp, taps, dfeat, grads);

  int nonzero = 0;
  for (int k = 0; k < 3; ++k) {
    for (Eigen::Index i = 0; i < grads[k].data.size(); ++i) {
      if (grads[k].data[i] == 0.0) continue;
      ++nonzero;
      CHECK(testutil::check_grad(&tp.planes[k].data[i], grads[k].data[i], loss));
    }
  }
  CHECK(nonzero == 3 * 4 * 4);  // 3 planes x 4 corners x 4 channels

  // Decoder parameter gradients on the same objective.
  for (Eigen::Index i = 0; i < dec.fc0.W.size(); i += 3)
    CHECK(testutil::check_grad(&dec.fc0.W.data()[i], dec.fc0.gW.data()[i], loss));
  for (Eigen::Index i = 0; i < dec.fc2.W.size(); i += 3)
    CHECK(testutil::check_grad(&dec.fc2.W.data()[i], dec.fc2.gW.data()[i], loss));
}

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dr3d/nn.hpp"
#include "testutil.hpp"

using namespace dr3d;
using namespace dr3d::nn;

namespace {

Tensor random_tensor(int c, int h, int w, Rng& rng) {
  Tensor t(c, h, w);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = rng.normal();
  return t;
}

// Direct triple-loop convolution, the oracle for the im2col path.
Tensor conv_naive(const Conv2d& cv, const Tensor& x) {
  const int oh = cv.out_h(x.h), ow = cv.out_h(x.w);
  Tensor out(cv.out_c, oh, ow);
  for (int o = 0; o < cv.out_c; ++o)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = cv.b(o, 0);
        for (int c = 0; c < cv.in_c; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy * cv.stride + ky - 1;
              const int ix = ox * cv.stride + kx - 1;
              if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
              acc += cv.W(o, (c * 3 + ky) * 3 + kx) * x.at(c, iy, ix);
            }
        out.at(o, oy, ox) = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("conv forward matches the direct-loop oracle") {
  Rng rng(11);
  for (int stride : {1, 2}) {
    Conv2d cv;
    cv.init(3, 5, stride, rng);
    const Tensor x = random_tensor(3, 7, 7, rng);
    Mat cols;
    const Tensor got = cv.forward(x, cols);
    const Tensor want = conv_naive(cv, x);
    REQUIRE(got.same_shape(want));
    CHECK((got.data - want.data).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("conv backward matches finite differences") {
  Rng rng(12);
  Conv2d cv;
  cv.init(2, 3, 2, rng);
  Tensor x = random_tensor(2, 6, 6, rng);
  const Tensor gy_seed = random_tensor(3, 3, 3, rng);

  // Scalar objective: <gy_seed, conv(x)>.
  auto loss = [&]() {
    Mat cols;
    const Tensor y = cv.forward(x, cols);
    return y.data.dot(gy_seed.data);
  };

  Mat cols;
  const Tensor y = cv.forward(x, cols);
  cv.gW.setZero();
  cv.gb.setZero();
  const Tensor gx = cv.backward(cols, gy_seed, x.h, x.w);

  int checked = 0;
  for (Eigen::Index i = 0; i < x.data.size(); i += 7) {
    CHECK(testutil::check_grad(&x.data[i], gx.data[i], loss));
    ++checked;
  }
  for (Eigen::Index i = 0; i < cv.W.size(); i += 5) {
    CHECK(testutil::check_grad(&cv.W.data()[i], cv.gW.data()[i], loss));
    ++checked;
  }
  CHECK(testutil::check_grad(&cv.b(1, 0), cv.gb(1, 0), loss));
  CHECK(checked > 10);
}

TEST_CASE("dense backward matches finite differences") {
  Rng rng(13);
  Dense fc;
  fc.init(4, 3, rng);
  Mat x(5, 4);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Mat gy(5, 3);
  for (int i = 0; i < gy.size(); ++i) gy.data()[i] = rng.normal();

  auto loss = [&]() { return (fc.forward(x).array() * gy.array()).sum(); };

  fc.gW.setZero();
  fc.gb.setZero();
  const Mat gx = fc.backward(x, gy);
  for (int i = 0; i < x.size(); ++i)
    CHECK(testutil::check_grad(&x.data()[i], gx.data()[i], loss));
  for (int i = 0; i < fc.W.size(); ++i)
    CHECK(testutil::check_grad(&fc.W.data()[i], fc.gW.data()[i], loss));
  for (int i = 0; i < fc.b.size(); ++i)
    CHECK(testutil::check_grad(&fc.b.data()[i], fc.gb.data()[i], loss));
}

TEST_CASE("upsample2x and its backward are adjoint") {
  Rng rng(14);
  const Tensor x = random_tensor(2, 4, 4, rng);
  const Tensor y = upsample2x(x);
  REQUIRE(y.h == 8);
  const Tensor gy = random_tensor(2, 8, 8, rng);
  const Tensor gx = upsample2x_backward(gy);
  // <up(x), gy> == <x, up^T(gy)>
  CHECK(y.data.dot(gy.data) == doctest::Approx(x.data.dot(gx.data)).epsilon(1e-12));
  CHECK(y.at(0, 5, 3) == x.at(0, 2, 1));
}

TEST_CASE("adam drives a quadratic to its minimum") {
  Mat theta = Mat::Constant(3, 1, 5.0);
  Mat g = Mat::Zero(3, 1);
  ParamRefs refs{{"theta", &theta, &g, false}};
  Adam opt(0.1, 0.0, 0.99, 1e-8);
  const Mat target = (Mat(3, 1) << 1.0, -2.0, 0.5).finished();
  for (int i = 0; i < 500; ++i) {
    g = theta - target;
    opt.step(refs);
  }
  CHECK((theta - target).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("adam skips frozen parameters and their state") {
  Mat a = Mat::Constant(2, 1, 1.0), ga = Mat::Constant(2, 1, 1.0);
  Mat b = Mat::Constant(2, 1, 1.0), gb = Mat::Constant(2, 1, 1.0);
  ParamRefs refs{{"a", &a, &ga, false}, {"b", &b, &gb, true}};
  Adam opt(0.1, 0.0, 0.99, 1e-8);
  opt.step(refs);
  CHECK(a(0, 0) != 1.0);
  CHECK(b(0, 0) == 1.0);
  CHECK(opt.state().count("b") == 0);
}

TEST_CASE("parameter hashing detects single-element changes") {
  Rng rng(15);
  Dense fc;
  fc.init(3, 3, rng);
  ParamRefs refs;
  fc.collect(refs, "fc");
  const std::uint64_t h0 = hash_params(refs);
  CHECK(h0 == hash_params(refs));
  fc.W(1, 2) += 1e-15;
  CHECK(h0 != hash_params(refs));
}

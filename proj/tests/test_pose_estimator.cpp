// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dr3d/losses.hpp"
#include "dr3d/pose_estimator.hpp"
#include "testutil.hpp"

using namespace dr3d;

namespace {

PoseEstimatorConfig tiny_config() {
  PoseEstimatorConfig cfg;
  cfg.resolution = 16;
  cfg.base_channels = 4;
  cfg.n_blocks = 3;
  return cfg;
}

Tensor random_image(int res, Rng& rng) {
  Tensor t(3, res, res);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("estimate clamps to the prior box and is deterministic") {
  PoseEstimator p;
  Rng rng(81);
  p.init(tiny_config(), PosePrior{}, rng);
  // Blow up the head so raw outputs land far outside the prior.
  p.head.W *= 100.0;
  p.head.b.setConstant(50.0);
  Rng ir(82);
  const Tensor img = random_image(16, ir);
  const Eigen::Vector2d e1 = p.estimate(img);
  const Eigen::Vector2d e2 = p.estimate(img);
  CHECK(e1 == e2);
  CHECK(e1.x() >= p.prior.yaw_min);
  CHECK(e1.x() <= p.prior.yaw_max);
  CHECK(e1.y() >= p.prior.pitch_min);
  CHECK(e1.y() <= p.prior.pitch_max);

  Tensor wrong(3, 8, 8);
  CHECK_THROWS_AS(p.estimate(wrong), ConfigError);
}

TEST_CASE("pose estimator backward matches finite differences") {
  PoseEstimator p;
  Rng rng(83);
  p.init(tiny_config(), PosePrior{}, rng);
  Rng ir(84);
  Tensor img = random_image(16, ir);
  const Eigen::Vector2d gr(0.7, -1.3);

  auto loss = [&]() { return p.forward(img).dot(gr); };

  PoseEstimator::Trace tr;
  p.forward(img, &tr);
  nn::ParamRefs refs;
  p.collect(refs, "p");
  nn::zero_grads(refs);
  const Tensor gimg = p.backward(tr, gr, img);

  for (Eigen::Index i = 0; i < img.data.size(); i += 23)
    CHECK(testutil::check_grad(&img.data[i], gimg.data[i], loss));
  int checked = 0, failed = 0;
  for (const auto& r : refs) {
    const int stride = std::max<int>(1, int(r.value->size()) / 6);
    for (int i = 0; i < r.value->size(); i += stride) {
      if (!testutil::check_grad(&r.value->data()[i], r.grad->data()[i], loss)) ++failed;
      ++checked;
    }
  }
  CHECK(checked > 30);
  CHECK(failed == 0);
}

TEST_CASE("train_pose_step reports pose_loss exactly and learns a batch") {
  PoseEstimator p;
  Rng rng(85);
  p.init(tiny_config(), PosePrior{}, rng);

  PoseBatch batch;
  Rng ir(86);
  for (int i = 0; i < 4; ++i) {
    batch.images.push_back(random_image(16, ir));
    batch.poses.emplace_back(ir.uniform(-0.5, 0.5), ir.uniform(-0.3, 0.3));
  }

  // The reported value must be the plain batch pose_loss, pre-update.
  std::vector<Eigen::Vector2d> preds;
  for (const auto& img : batch.images) preds.push_back(p.forward(img));
  const double expect = pose_loss(batch.poses, preds);

  nn::Adam opt(3e-3, 0.0, 0.99, 1e-8);
  const double first = train_pose_step(p, batch, opt);
  CHECK(first == expect);

  double last = first;
  for (int i = 0; i < 150; ++i) last = train_pose_step(p, batch, opt);
  CHECK(last < 0.05 * first);
}

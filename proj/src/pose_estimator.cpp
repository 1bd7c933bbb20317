// SPDX-License-Identifier: Apache-2.0
#include "dr3d/pose_estimator.hpp"

#include "dr3d/losses.hpp"

namespace dr3d {

void PoseEstimator::init(const PoseEstimatorConfig& cfg_, const PosePrior& prior_,
                         Rng& rng) {
  cfg = cfg_;
  prior = prior_;
  if (cfg.resolution >> cfg.n_blocks < 2)
    throw ConfigError("pose_estimator: too many blocks for the resolution");
  convs.clear();
  convs.resize(std::size_t(cfg.n_blocks));
  int in_c = 3;
  int out_c = cfg.base_channels;
  for (int b = 0; b < cfg.n_blocks; ++b) {
    convs[std::size_t(b)].init(in_c, out_c, 2, rng);
    in_c = out_c;
    out_c *= 2;
  }
  const int final_res = cfg.resolution >> cfg.n_blocks;
  head.init(in_c * final_res * final_res, 2, rng);
}

Eigen::Vector2d PoseEstimator::forward(const Tensor& img, Trace* tr) const {
  if (img.c != 3 || img.h != cfg.resolution || img.w != cfg.resolution)
    throw ConfigError("pose_estimator: image resolution mismatch");
  Tensor x = img;
  if (tr) {
    tr->cols.resize(convs.size());
    tr->pres.resize(convs.size());
  }
  Mat scratch;
  for (std::size_t b = 0; b < convs.size(); ++b) {
    Tensor pre = convs[b].forward(x, tr ? tr->cols[b] : scratch);
    if (tr) tr->pres[b] = pre;
    for (Eigen::Index i = 0; i < pre.data.size(); ++i)
      pre.data[i] = nn::lrelu(pre.data[i], kSlope);
    x = std::move(pre);
  }
  Mat flat = x.data.transpose();
  const Mat out = head.forward(flat);
  Eigen::Vector2d raw(out(0, 0), out(0, 1));
  if (tr) {
    tr->flat = std::move(flat);
    tr->raw = raw;
  }
  return raw;
}

Eigen::Vector2d PoseEstimator::estimate(const Tensor& img) const {
  const Eigen::Vector2d raw = forward(img);
  return {clamp(raw.x(), prior.yaw_min, prior.yaw_max),
          clamp(raw.y(), prior.pitch_min, prior.pitch_max)};
}

Tensor PoseEstimator::backward(const Trace& tr, const Eigen::Vector2d& graw,
                               const Tensor& img) {
  Mat gl(1, 2);
  gl << graw.x(), graw.y();
  Mat gflat = head.backward(tr.flat, gl);
  const Tensor& last_pre = tr.pres.back();
  Tensor g(last_pre.c, last_pre.h, last_pre.w);
  g.data = gflat.row(0).transpose();
  for (int b = int(convs.size()) - 1; b >= 0; --b) {
    const Tensor& pre = tr.pres[std::size_t(b)];
    for (Eigen::Index i = 0; i < g.data.size(); ++i)
      g.data[i] *= nn::lrelu_grad(pre.data[i], kSlope);
    const int in_h = b == 0 ? img.h : tr.pres[std::size_t(b) - 1].h;
    const int in_w = b == 0 ? img.w : tr.pres[std::size_t(b) - 1].w;
    g = convs[std::size_t(b)].backward(tr.cols[std::size_t(b)], g, in_h, in_w);
  }
  return g;
}

void PoseEstimator::collect(nn::ParamRefs& out, const std::string& prefix) {
  for (std::size_t b = 0; b < convs.size(); ++b)
    convs[b].collect(out, prefix + ".block" + std::to_string(b));
  head.collect(out, prefix + ".head");
}

double train_pose_step(PoseEstimator& p, const PoseBatch& batch, nn::Adam& opt) {
  if (batch.images.size() != batch.poses.size() || batch.images.empty())
    throw ConfigError("train_pose_step: bad batch");
  nn::ParamRefs refs;
  p.collect(refs, "p");
  nn::zero_grads(refs);

  std::vector<PoseEstimator::Trace> traces(batch.images.size());
  std::vector<Eigen::Vector2d> preds(batch.images.size());
  for (std::size_t i = 0; i < batch.images.size(); ++i)
    preds[i] = p.forward(batch.images[i], &traces[i]);

  std::vector<Eigen::Vector2d> gpred;
  const double loss = pose_loss(batch.poses, preds, &gpred);
  for (std::size_t i = 0; i < batch.images.size(); ++i)
    p.backward(traces[i], gpred[i], batch.images[i]);
  opt.step(refs);
  return loss;
}

}  // namespace dr3d

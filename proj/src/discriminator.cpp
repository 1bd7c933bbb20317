// SPDX-License-Identifier: Apache-2.0
#include "dr3d/discriminator.hpp"

#include <cmath>

namespace dr3d {

void Discriminator::init(const DiscriminatorConfig& cfg_, Rng& rng) {
  cfg = cfg_;
  if (cfg.resolution >> cfg.n_blocks < 2)
    throw ConfigError("discriminator: too many blocks for the resolution");
  pose_embed.init(2, cfg.pose_embed_dim, rng);
  convs.clear();
  convs.resize(std::size_t(cfg.n_blocks));
  int in_c = 3 + cfg.pose_embed_dim;
  int out_c = cfg.base_channels;
  for (int b = 0; b < cfg.n_blocks; ++b) {
    convs[std::size_t(b)].init(in_c, out_c, 2, rng);
    in_c = out_c;
    out_c *= 2;
  }
  const int final_res = cfg.resolution >> cfg.n_blocks;
  head.init(in_c * final_res * final_res, 1, rng);
}

double Discriminator::discriminate(const Tensor& img, const CameraPose& pose,
                                   Trace* tr) const {
  if (img.c != 3 || img.h != cfg.resolution || img.w != cfg.resolution)
    throw ConfigError("discriminator: image resolution mismatch");
  Mat emb_in(1, 2);
  emb_in << pose.yaw, pose.pitch;
  const Mat emb = pose_embed.forward(emb_in);

  Tensor x(3 + cfg.pose_embed_dim, img.h, img.w);
  x.data.head(img.data.size()) = img.data;
  for (int c = 0; c < cfg.pose_embed_dim; ++c)
    x.channel(3 + c).setConstant(emb(0, c));

  if (tr) {
    tr->x0 = x;
    tr->emb_in = emb_in;
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
  const double logit = head.forward(flat)(0, 0);
  if (tr) {
    tr->flat = std::move(flat);
    tr->logit = logit;
  }
  return logit;
}

Tensor Discriminator::backward(const Trace& tr, double glogit) {
  Mat gflat = head.backward(tr.flat, Mat::Constant(1, 1, glogit));
  // Reshape the flat gradient back onto the last feature map.
  const Tensor& last_pre = tr.pres.back();
  Tensor g(last_pre.c, last_pre.h, last_pre.w);
  g.data = gflat.row(0).transpose();
  for (int b = int(convs.size()) - 1; b >= 0; --b) {
    const Tensor& pre = tr.pres[std::size_t(b)];
    for (Eigen::Index i = 0; i < g.data.size(); ++i)
      g.data[i] *= nn::lrelu_grad(pre.data[i], kSlope);
    const Tensor& input = b == 0 ? tr.x0 : tr.pres[std::size_t(b) - 1];
    g = convs[std::size_t(b)].backward(tr.cols[std::size_t(b)], g, input.h, input.w);
  }
  // Embedding channels: constant broadcast, so the embedding gradient is the
  // per-channel sum over pixels.
  Mat gemb(1, cfg.pose_embed_dim);
  for (int c = 0; c < cfg.pose_embed_dim; ++c) gemb(0, c) = g.channel(3 + c).sum();
  pose_embed.backward(tr.emb_in, gemb);

  Tensor gimg(3, g.h, g.w);
  gimg.data = g.data.head(gimg.data.size());
  return gimg;
}

Tensor Discriminator::input_grad(const Trace& tr) const {
  Mat gflat = head.W;  // d logit / d flat
  const Tensor& last_pre = tr.pres.back();
  Tensor g(last_pre.c, last_pre.h, last_pre.w);
  g.data = gflat.row(0).transpose();
  for (int b = int(convs.size()) - 1; b >= 0; --b) {
    const Tensor& pre = tr.pres[std::size_t(b)];
    for (Eigen::Index i = 0; i < g.data.size(); ++i)
      g.data[i] *= nn::lrelu_grad(pre.data[i], kSlope);
    const Tensor& input = b == 0 ? tr.x0 : tr.pres[std::size_t(b) - 1];
    g = convs[std::size_t(b)].input_grad(convs[std::size_t(b)].W, g, input.h, input.w);
  }
  return g;
}

Tensor Discriminator::features_input_grad(const Trace& tr, const Mat& gflat) const {
  const Tensor& last_pre = tr.pres.back();
  Tensor g(last_pre.c, last_pre.h, last_pre.w);
  g.data = gflat.row(0).transpose();
  for (int b = int(convs.size()) - 1; b >= 0; --b) {
    const Tensor& pre = tr.pres[std::size_t(b)];
    for (Eigen::Index i = 0; i < g.data.size(); ++i)
      g.data[i] *= nn::lrelu_grad(pre.data[i], kSlope);
    const Tensor& input = b == 0 ? tr.x0 : tr.pres[std::size_t(b) - 1];
    g = convs[std::size_t(b)].input_grad(convs[std::size_t(b)].W, g, input.h,
                                         input.w);
  }
  Tensor gimg(3, g.h, g.w);
  gimg.data = g.data.head(gimg.data.size());
  return gimg;
}

double Discriminator::r1_penalty(const Trace& tr, double coef) {
  // v = d logit / d image (embedding channels excluded from the norm).
  const Tensor gx0 = input_grad(tr);
  Tensor u(gx0.c, gx0.h, gx0.w);
  u.data.head(std::size_t(3) * gx0.h * gx0.w) =
      gx0.data.head(std::size_t(3) * gx0.h * gx0.w);

  // Tangent forward pass: u_k = phi'(pre_k) * conv_k(u_{k-1}), no biases.
  // The head then contracts: s = <W_head, flat(u_B)> = ||v||^2.
  std::vector<Mat> ucols(convs.size());
  for (std::size_t b = 0; b < convs.size(); ++b) {
    Tensor t = convs[b].forward_with_weights(u, convs[b].W, ucols[b], false);
    const Tensor& pre = tr.pres[b];
    for (Eigen::Index i = 0; i < t.data.size(); ++i)
      t.data[i] *= nn::lrelu_grad(pre.data[i], kSlope);
    u = std::move(t);
  }
  const double s = head.W.row(0).dot(u.data);

  // Reverse over the tangent chain; primal activations enter only through
  // the masks, whose derivative vanishes almost everywhere.
  const double c2 = 2.0 * coef;
  head.gW.row(0) += c2 * u.data.transpose();
  Tensor mu(u.c, u.h, u.w);
  mu.data = head.W.row(0).transpose();
  for (int b = int(convs.size()) - 1; b >= 0; --b) {
    const Tensor& pre = tr.pres[std::size_t(b)];
    for (Eigen::Index i = 0; i < mu.data.size(); ++i)
      mu.data[i] *= nn::lrelu_grad(pre.data[i], kSlope);
    convs[std::size_t(b)].gW += c2 * nn::Conv2d::weight_grad(ucols[std::size_t(b)], mu);
    if (b > 0) {
      const Tensor& input = tr.pres[std::size_t(b) - 1];
      mu = convs[std::size_t(b)].input_grad(convs[std::size_t(b)].W, mu, input.h,
                                            input.w);
    }
  }
  return s;
}

void Discriminator::collect(nn::ParamRefs& out, const std::string& prefix) {
  pose_embed.collect(out, prefix + ".pose_embed");
  for (std::size_t b = 0; b < convs.size(); ++b)
    convs[b].collect(out, prefix + ".block" + std::to_string(b),
                     int(b) < cfg.freeze_blocks);
  head.collect(out, prefix + ".head");
}

}  // namespace dr3d

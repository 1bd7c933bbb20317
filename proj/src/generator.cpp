// SPDX-License-Identifier: Apache-2.0
#include "dr3d/generator.hpp"

#include <cmath>

namespace dr3d {

void GeneratorConfig::validate() const {
  if (synth_blocks < 2) throw ConfigError("generator: synth_blocks must be >= 2");
  if (plane_res != base_res << (synth_blocks - 1)) {
    throw ConfigError("generator: plane_res must equal base_res * 2^(synth_blocks-1)");
  }
  if (z_dim < 1 || zd_dim < 1 || w_dim < 1)
    throw ConfigError("generator: latent dims must be positive");
}

// ---- mapping ----------------------------------------------------------------

void Mapping::init(const GeneratorConfig& cfg, Rng& rng) {
  fcs.clear();
  fcs.resize(cfg.mapping_layers);
  for (int i = 0; i < cfg.mapping_layers; ++i) {
    const int in = i == 0 ? cfg.z_dim : cfg.mapping_width;
    const int out = i == cfg.mapping_layers - 1 ? cfg.w_dim : cfg.mapping_width;
    fcs[i].init(in, out, rng);
  }
}

Vec Mapping::forward(const Vec& z, Trace* tr) const {
  Mat x = z.transpose();
  if (tr) {
    tr->xs.clear();
    tr->pres.clear();
  }
  for (std::size_t i = 0; i < fcs.size(); ++i) {
    if (tr) tr->xs.push_back(x);
    Mat pre = fcs[i].forward(x);
    if (tr) tr->pres.push_back(pre);
    if (i + 1 < fcs.size()) nn::lrelu_forward(pre, SynthBlock::kSlope);
    x = std::move(pre);
  }
  return x.transpose();
}

Vec Mapping::backward(const Trace& tr, const Vec& gw) {
  Mat g = gw.transpose();
  for (int i = int(fcs.size()) - 1; i >= 0; --i) {
    if (i + 1 < int(fcs.size()))
      nn::lrelu_backward(tr.pres[std::size_t(i)], g, SynthBlock::kSlope);
    g = fcs[std::size_t(i)].backward(tr.xs[std::size_t(i)], g);
  }
  return g.transpose();
}

void Mapping::collect(nn::ParamRefs& out, const std::string& prefix, bool frozen) {
  for (std::size_t i = 0; i < fcs.size(); ++i)
    fcs[i].collect(out, prefix + ".fc" + std::to_string(i), frozen);
}

// ---- deformation -------------------------------------------------------------

void Deformation::init(const GeneratorConfig& cfg, Rng& rng) {
  out_c = cfg.synth_channels;
  out_res = cfg.base_res;
  fc0.init(cfg.zd_dim, cfg.deform_width, rng);
  fc1.init(cfg.deform_width, cfg.deform_width, rng);
  head.init(cfg.deform_width, out_c * out_res * out_res, rng);
  head.W.setZero();  // identity deformation at init, bit-exactly
  head.b.setZero();
}

Tensor Deformation::forward(const Vec& zd, Trace* tr) const {
  Mat x0 = zd.transpose();
  Mat pre0 = fc0.forward(x0);
  Mat a0 = pre0;
  nn::lrelu_forward(a0, SynthBlock::kSlope);
  Mat pre1 = fc1.forward(a0);
  Mat a1 = pre1;
  nn::lrelu_forward(a1, SynthBlock::kSlope);
  Mat out = head.forward(a1);
  Tensor res(out_c, out_res, out_res);
  for (Eigen::Index i = 0; i < res.data.size(); ++i) res.data[i] = out(0, i);
  if (tr) {
    tr->x0 = std::move(x0);
    tr->pre0 = std::move(pre0);
    tr->a0 = std::move(a0);
    tr->pre1 = std::move(pre1);
    tr->a1 = std::move(a1);
  }
  return res;
}

Vec Deformation::backward(const Trace& tr, const Tensor& gres) {
  Mat gout(1, gres.data.size());
  for (Eigen::Index i = 0; i < gres.data.size(); ++i) gout(0, i) = gres.data[i];
  Mat ga1 = head.backward(tr.a1, gout);
  nn::lrelu_backward(tr.pre1, ga1, SynthBlock::kSlope);
  Mat ga0 = fc1.backward(tr.a0, ga1);
  nn::lrelu_backward(tr.pre0, ga0, SynthBlock::kSlope);
  Mat gz = fc0.backward(tr.x0, ga0);
  return gz.transpose();
}

void Deformation::collect(nn::ParamRefs& out, const std::string& prefix, bool frozen) {
  fc0.collect(out, prefix + ".fc0", frozen);
  fc1.collect(out, prefix + ".fc1", frozen);
  head.collect(out, prefix + ".head", frozen);
}

// ---- synthesis block ----------------------------------------------------------

void SynthBlock::init(int in_c, int out_c, int w_dim, Rng& rng) {
  affine.init(w_dim, in_c, rng, -1.0, 1.0);  // styles start near 1
  conv.init(in_c, out_c, 1, rng);
}

Mat SynthBlock::modulated_weights(const Vec& wvec, bool demodulate, Vec* d_out) const {
  const Mat s = affine.forward(wvec.transpose());  // (1, in_c)
  Mat w1 = conv.W;
  for (int o = 0; o < conv.out_c; ++o)
    for (int j = 0; j < conv.in_c * 9; ++j) w1(o, j) *= s(0, j / 9);
  if (!demodulate) return w1;
  for (int o = 0; o < conv.out_c; ++o) {
    const double d = 1.0 / std::sqrt(w1.row(o).squaredNorm() + kDemodEps);
    if (d_out) (*d_out)[o] = d;
    w1.row(o) *= d;
  }
  return w1;
}

Tensor SynthBlock::forward(const Tensor& x, const Vec& wvec, Trace* tr) const {
  const Mat s = affine.forward(wvec.transpose());  // (1, in_c)
  Mat w1 = conv.W;
  for (int o = 0; o < conv.out_c; ++o)
    for (int j = 0; j < conv.in_c * 9; ++j) w1(o, j) *= s(0, j / 9);
  Vec d(conv.out_c);
  Mat w2 = w1;
  for (int o = 0; o < conv.out_c; ++o) {
    d[o] = 1.0 / std::sqrt(w1.row(o).squaredNorm() + kDemodEps);
    w2.row(o) *= d[o];
  }
  Mat cols;
  Tensor pre = conv.forward_with_weights(x, w2, cols, true);
  Tensor act = pre;
  for (Eigen::Index i = 0; i < act.data.size(); ++i)
    act.data[i] = nn::lrelu(act.data[i], kSlope);
  if (tr) {
    tr->x = x;
    tr->win = wvec.transpose();
    tr->cols = std::move(cols);
    tr->s = s.row(0).transpose();
    tr->d = d;
    tr->w1 = std::move(w1);
    tr->w2 = std::move(w2);
    tr->pre = std::move(pre);
  }
  return act;
}

Tensor SynthBlock::backward(const Trace& tr, Tensor gy, Vec& gw) {
  // Through the activation.
  for (Eigen::Index i = 0; i < gy.data.size(); ++i)
    gy.data[i] *= nn::lrelu_grad(tr.pre.data[i], kSlope);

  // Bias and effective-weight gradients of the conv.
  const int np = gy.h * gy.w;
  Mat gymat(gy.c, np);
  for (int o = 0; o < gy.c; ++o)
    for (int p = 0; p < np; ++p) gymat(o, p) = gy.data[std::size_t(o) * np + p];
  conv.gb.col(0) += gymat.rowwise().sum();
  Mat gW2 = gymat * tr.cols.transpose();
  Tensor gx = conv.input_grad(tr.w2, gy, tr.x.h, tr.x.w);

  // Demodulation: w2 = w1 * d(o), d = (|w1_o|^2 + eps)^{-1/2}.
  Mat gW1(conv.out_c, conv.in_c * 9);
  for (int o = 0; o < conv.out_c; ++o) {
    const double c = gW2.row(o).dot(tr.w1.row(o));
    const double d = tr.d[o];
    gW1.row(o) = gW2.row(o) * d - tr.w1.row(o) * (d * d * d * c);
  }

  // Modulation: w1 = W * s(i).
  Mat gs = Mat::Zero(1, conv.in_c);
  for (int o = 0; o < conv.out_c; ++o)
    for (int j = 0; j < conv.in_c * 9; ++j) {
      conv.gW(o, j) += gW1(o, j) * tr.s[j / 9];
      gs(0, j / 9) += gW1(o, j) * conv.W(o, j);
    }
  const Mat gwrow = affine.backward(tr.win, gs);
  gw += gwrow.row(0).transpose();
  return gx;
}

void SynthBlock::collect(nn::ParamRefs& out, const std::string& prefix, bool frozen) {
  affine.collect(out, prefix + ".affine", frozen);
  conv.collect(out, prefix + ".conv", frozen);
}

// ---- generator -----------------------------------------------------------------

void Generator::init(const GeneratorConfig& cfg_, Rng& rng) {
  cfg = cfg_;
  cfg.validate();
  mapping.init(cfg, rng);
  deform.init(cfg, rng);
  const int c0 = cfg.synth_channels;
  const_input.resize(c0 * cfg.base_res * cfg.base_res, 1);
  for (int i = 0; i < const_input.size(); ++i) const_input.data()[i] = rng.normal();
  g_const_input = Mat::Zero(const_input.rows(), 1);
  blocks.clear();
  blocks.resize(std::size_t(cfg.synth_blocks));
  for (int b = 0; b < cfg.synth_blocks; ++b) {
    const int out = b == cfg.synth_blocks - 1 ? 3 * cfg.plane_channels : c0;
    blocks[std::size_t(b)].init(c0, out, cfg.w_dim, rng);
  }
  decoder.init(cfg.plane_channels, cfg.decoder_width, rng);
}

TriPlane Generator::make_planes(const Vec& w, const Vec& zd, Trace* tr) const {
  const int c0 = cfg.synth_channels;
  Tensor x(c0, cfg.base_res, cfg.base_res);
  x.data = const_input.col(0);

  Tensor residual = deform.forward(zd, tr ? &tr->def_tr : nullptr);
  if (tr) {
    tr->blk_tr.clear();
    tr->blk_tr.resize(blocks.size());
    tr->residual = residual;
    tr->w = w;
    tr->zd = zd;
  }

  Tensor act;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    act = blocks[b].forward(x, w, tr ? &tr->blk_tr[b] : nullptr);
    if (b == 0) act.data += residual.data;  // deformation joins after block 0
    if (b + 1 < blocks.size()) x = nn::upsample2x(act);
  }

  TriPlane tp(cfg.plane_res, cfg.plane_channels, cfg.extent);
  const int plane_sz = cfg.plane_res * cfg.plane_res;
  for (int k = 0; k < 3; ++k)
    tp.planes[k].data =
        act.data.segment(std::size_t(k) * cfg.plane_channels * plane_sz,
                         std::size_t(cfg.plane_channels) * plane_sz);
  if (tr) tr->tp = tp;
  return tp;
}

RenderOutput Generator::generate(const Vec& z, const Vec& zd, const CameraPose& pose,
                                 const RenderParams& rp, std::uint64_t strat_seed,
                                 Trace* tr) const {
  const Vec w = mapping.forward(z, tr ? &tr->map_tr : nullptr);
  if (tr) {
    tr->through_mapping = true;
    tr->z = z;
  }
  return generate_from_w(w, zd, pose, rp, strat_seed, tr);
}

RenderOutput Generator::generate_from_w(const Vec& w, const Vec& zd,
                                        const CameraPose& pose, const RenderParams& rp,
                                        std::uint64_t strat_seed, Trace* tr) const {
  const TriPlane tp = make_planes(w, zd, tr);
  return render(tp, decoder, pose, rp, strat_seed, tr ? &tr->rt : nullptr);
}

Generator::InputGrads Generator::backward(const Trace& tr, const Tensor& dimage,
                                          const Mat& ddepth) {
  const int C = cfg.plane_channels;
  const int plane_sz = cfg.plane_res * cfg.plane_res;

  Tensor pg[3] = {Tensor(C, cfg.plane_res, cfg.plane_res),
                  Tensor(C, cfg.plane_res, cfg.plane_res),
                  Tensor(C, cfg.plane_res, cfg.plane_res)};
  render_backward(tr.tp, decoder, tr.rt, dimage, ddepth, Mat(), pg);

  // Plane grads -> last block activation grads.
  Tensor gact(3 * C, cfg.plane_res, cfg.plane_res);
  for (int k = 0; k < 3; ++k)
    gact.data.segment(std::size_t(k) * C * plane_sz, std::size_t(C) * plane_sz) =
        pg[k].data;

  InputGrads ig;
  ig.gw = Vec::Zero(cfg.w_dim);
  Tensor gres;
  for (int b = int(blocks.size()) - 1; b >= 0; --b) {
    if (b + 1 < int(blocks.size())) gact = nn::upsample2x_backward(gact);
    if (b == 0) gres = gact;  // residual branches off after block 0
    gact = blocks[std::size_t(b)].backward(tr.blk_tr[std::size_t(b)], gact, ig.gw);
  }
  g_const_input.col(0) += gact.data;

  ig.gzd = deform.backward(tr.def_tr, gres);
  if (tr.through_mapping) ig.gz = mapping.backward(tr.map_tr, ig.gw);
  return ig;
}

void Generator::collect(nn::ParamRefs& out, const std::string& prefix,
                        bool deform_frozen) {
  mapping.collect(out, prefix + ".mapping");
  deform.collect(out, prefix + ".deform", deform_frozen);
  out.push_back({prefix + ".const", &const_input, &g_const_input, false});
  for (std::size_t b = 0; b < blocks.size(); ++b)
    blocks[b].collect(out, prefix + ".synth.block" + std::to_string(b));
  decoder.collect(out, prefix + ".decoder");
}

void Generator::collect_pivotal(nn::ParamRefs& out, const std::string& prefix) {
  deform.collect(out, prefix + ".deform");
  out.push_back({prefix + ".const", &const_input, &g_const_input, false});
  for (std::size_t b = 0; b < blocks.size(); ++b)
    blocks[b].collect(out, prefix + ".synth.block" + std::to_string(b));
  decoder.collect(out, prefix + ".decoder");
}

}  // namespace dr3d

// SPDX-License-Identifier: Apache-2.0
#include "dr3d/nn.hpp"

#include <cmath>

namespace dr3d::nn {

std::uint64_t hash_params(const ParamRefs& refs) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& r : refs) {
    h = fnv1a(r.name.data(), r.name.size(), h);
    h = hash_bytes(*r.value, h);
  }
  return h;
}

void lrelu_forward(Mat& x, double slope) {
  double* p = x.data();
  for (Eigen::Index i = 0; i < x.size(); ++i) p[i] = lrelu(p[i], slope);
}

void lrelu_backward(const Mat& pre, Mat& gy, double slope) {
  const double* q = pre.data();
  double* p = gy.data();
  for (Eigen::Index i = 0; i < gy.size(); ++i) p[i] *= lrelu_grad(q[i], slope);
}

// ---- dense ----------------------------------------------------------------

void Dense::init(int in, int out, Rng& rng, double w_scale, double b_init) {
  const double scale = w_scale >= 0.0 ? w_scale : 1.0 / std::sqrt(double(in));
  W.resize(out, in);
  for (int o = 0; o < out; ++o)
    for (int i = 0; i < in; ++i) W(o, i) = scale * rng.normal();
  b = Mat::Constant(out, 1, b_init);
  gW = Mat::Zero(out, in);
  gb = Mat::Zero(out, 1);
}

Mat Dense::forward(const Mat& x) const {
  Mat y = x * W.transpose();
  y.rowwise() += b.col(0).transpose();
  return y;
}

Mat Dense::backward(const Mat& x, const Mat& gy) {
  gW.noalias() += gy.transpose() * x;
  gb.col(0) += gy.colwise().sum().transpose();
  return gy * W;
}

void Dense::collect(ParamRefs& out, const std::string& prefix, bool frozen) {
  out.push_back({prefix + ".w", &W, &gW, frozen});
  out.push_back({prefix + ".b", &b, &gb, frozen});
}

// ---- conv -----------------------------------------------------------------

void Conv2d::init(int in_c_, int out_c_, int stride_, Rng& rng) {
  in_c = in_c_;
  out_c = out_c_;
  stride = stride_;
  const double scale = 1.0 / std::sqrt(double(in_c) * 9.0);
  W.resize(out_c, in_c * 9);
  for (int o = 0; o < out_c; ++o)
    for (int i = 0; i < in_c * 9; ++i) W(o, i) = scale * rng.normal();
  b = Mat::Zero(out_c, 1);
  gW = Mat::Zero(out_c, in_c * 9);
  gb = Mat::Zero(out_c, 1);
}

Mat im2col(const Tensor& x, int stride) {
  const int oh = (x.h + 2 - 3) / stride + 1;
  const int ow = (x.w + 2 - 3) / stride + 1;
  Mat cols(x.c * 9, oh * ow);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const int col = oy * ow + ox;
      for (int c = 0; c < x.c; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            const double v = (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                                 ? x.at(c, iy, ix)
                                 : 0.0;
            cols((c * 3 + ky) * 3 + kx, col) = v;
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const Mat& cols, int stride, Tensor& gx) {
  const int oh = (gx.h + 2 - 3) / stride + 1;
  const int ow = (gx.w + 2 - 3) / stride + 1;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const int col = oy * ow + ox;
      for (int c = 0; c < gx.c; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= gx.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride + kx - 1;
            if (ix < 0 || ix >= gx.w) continue;
            gx.at(c, iy, ix) += cols((c * 3 + ky) * 3 + kx, col);
          }
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& x, Mat& cols) const {
  return forward_with_weights(x, W, cols, true);
}

Tensor Conv2d::forward_with_weights(const Tensor& x, const Mat& weights,
                                    Mat& cols, bool add_bias) const {
  cols = im2col(x, stride);
  const int oh = out_h(x.h), ow = out_h(x.w);
  Mat y = weights * cols;  // (out_c, oh*ow)
  if (add_bias) y.colwise() += b.col(0);
  Tensor out(out_c, oh, ow);
  for (int o = 0; o < out_c; ++o)
    for (int p = 0; p < oh * ow; ++p) out.data[std::size_t(o) * oh * ow + p] = y(o, p);
  return out;
}

Mat Conv2d::weight_grad(const Mat& cols, const Tensor& gy) {
  const int np = gy.h * gy.w;
  Mat gymat(gy.c, np);
  for (int o = 0; o < gy.c; ++o)
    for (int p = 0; p < np; ++p) gymat(o, p) = gy.data[std::size_t(o) * np + p];
  return gymat * cols.transpose();
}

Tensor Conv2d::backward(const Mat& cols, const Tensor& gy, int in_h, int in_w) {
  const int np = gy.h * gy.w;
  Mat gymat(gy.c, np);
  for (int o = 0; o < gy.c; ++o)
    for (int p = 0; p < np; ++p) gymat(o, p) = gy.data[std::size_t(o) * np + p];
  gW.noalias() += gymat * cols.transpose();
  gb.col(0) += gymat.rowwise().sum();
  Mat gcols = W.transpose() * gymat;
  Tensor gx(in_c, in_h, in_w);
  col2im(gcols, stride, gx);
  return gx;
}

Tensor Conv2d::input_grad(const Mat& weights, const Tensor& gy, int in_h,
                          int in_w) const {
  const int np = gy.h * gy.w;
  Mat gymat(gy.c, np);
  for (int o = 0; o < gy.c; ++o)
    for (int p = 0; p < np; ++p) gymat(o, p) = gy.data[std::size_t(o) * np + p];
  Mat gcols = weights.transpose() * gymat;
  Tensor gx(in_c, in_h, in_w);
  col2im(gcols, stride, gx);
  return gx;
}

void Conv2d::collect(ParamRefs& out, const std::string& prefix, bool frozen) {
  out.push_back({prefix + ".w", &W, &gW, frozen});
  out.push_back({prefix + ".b", &b, &gb, frozen});
}

Tensor upsample2x(const Tensor& x) {
  Tensor out(x.c, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int xx = 0; xx < out.w; ++xx)
        out.at(c, y, xx) = x.at(c, y / 2, xx / 2);
  return out;
}

Tensor upsample2x_backward(const Tensor& gy) {
  Tensor gx(gy.c, gy.h / 2, gy.w / 2);
  for (int c = 0; c < gy.c; ++c)
    for (int y = 0; y < gy.h; ++y)
      for (int xx = 0; xx < gy.w; ++xx)
        gx.at(c, y / 2, xx / 2) += gy.at(c, y, xx);
  return gx;
}

// ---- optimizer -------------------------------------------------------------

void Adam::step(const ParamRefs& refs) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (const auto& r : refs) {
    if (r.frozen) continue;
    Slot& s = state_[r.name];
    if (s.m.size() == 0) {
      s.m = Mat::Zero(r.value->rows(), r.value->cols());
      s.v = Mat::Zero(r.value->rows(), r.value->cols());
    }
    s.m = beta1_ * s.m + (1.0 - beta1_) * (*r.grad);
    s.v = beta2_ * s.v.array().matrix() +
          (1.0 - beta2_) * r.grad->array().square().matrix();
    const Mat mhat = s.m / bc1;
    const Mat vhat = s.v / bc2;
    r.value->array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
  }
}

}  // namespace dr3d::nn

// SPDX-License-Identifier: Apache-2.0
#include "dr3d/triplane.hpp"

#include <cmath>

namespace dr3d {

TriPlane::TriPlane(int res_, int channels_, double extent_)
    : res(res_), channels(channels_), extent(extent_) {
  for (auto& p : planes) p = Tensor(channels, res, res);
}

void TriPlane::set_zero() {
  for (auto& p : planes) p.set_zero();
}

namespace {

// align-corners grid: coordinate -1 maps to texel 0, +1 to texel res-1.
inline BilinearTap make_tap(double u, double v, int res) {
  const double gu = (clamp(u, -1.0, 1.0) + 1.0) * 0.5 * (res - 1);
  const double gv = (clamp(v, -1.0, 1.0) + 1.0) * 0.5 * (res - 1);
  BilinearTap t;
  t.x0 = std::min(int(std::floor(gu)), res - 2);
  t.y0 = std::min(int(std::floor(gv)), res - 2);
  t.x0 = std::max(t.x0, 0);
  t.y0 = std::max(t.y0, 0);
  t.fx = gu - t.x0;
  t.fy = gv - t.y0;
  return t;
}

inline void plane_uv(int k, const Eigen::Vector3d& q, double& u, double& v) {
  switch (k) {
    case 0: u = q.x(); v = q.y(); break;  // XY
    case 1: u = q.x(); v = q.z(); break;  // XZ
    default: u = q.y(); v = q.z(); break; // YZ
  }
}

}  // namespace

Mat sample_features(const TriPlane& tp, const std::vector<Eigen::Vector3d>& pts,
                    std::vector<BilinearTap>* taps) {
  const int n = int(pts.size());
  const int C = tp.channels;
  Mat feat = Mat::Zero(n, C);
  if (taps) taps->resize(std::size_t(n) * 3);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d q = pts[std::size_t(i)] / tp.extent;
    for (int k = 0; k < 3; ++k) {
      double u, v;
      plane_uv(k, q, u, v);
      const BilinearTap t = make_tap(u, v, tp.res);
      if (taps) (*taps)[std::size_t(i) * 3 + k] = t;
      const Tensor& pl = tp.planes[k];
      const double w00 = (1 - t.fx) * (1 - t.fy), w10 = t.fx * (1 - t.fy);
      const double w01 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
      for (int c = 0; c < C; ++c) {
        feat(i, c) += w00 * pl.at(c, t.y0, t.x0) + w10 * pl.at(c, t.y0, t.x0 + 1) +
                      w01 * pl.at(c, t.y0 + 1, t.x0) + w11 * pl.at(c, t.y0 + 1, t.x0 + 1);
      }
    }
  }
  return feat;
}

void sample_features_backward(const TriPlane& tp, const std::vector<BilinearTap>& taps,
                              const Mat& dfeat, Tensor grads[3]) {
  const int n = int(dfeat.rows());
  const int C = tp.channels;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      const BilinearTap& t = taps[std::size_t(i) * 3 + k];
      Tensor& g = grads[k];
      const double w00 = (1 - t.fx) * (1 - t.fy), w10 = t.fx * (1 - t.fy);
      const double w01 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
      for (int c = 0; c < C; ++c) {
        const double d = dfeat(i, c);
        g.at(c, t.y0, t.x0) += w00 * d;
        g.at(c, t.y0, t.x0 + 1) += w10 * d;
        g.at(c, t.y0 + 1, t.x0) += w01 * d;
        g.at(c, t.y0 + 1, t.x0 + 1) += w11 * d;
      }
    }
  }
}

void Decoder::init(int in_channels, int hidden, Rng& rng) {
  fc0.init(in_channels, hidden, rng);
  fc1.init(hidden, hidden, rng);
  fc2.init(hidden, 4, rng);
  fc2.b(0, 0) = -1.0;  // empty-by-default density
}

void Decoder::forward(const Mat& feat, Vec& sigma, Mat& rgb, Trace* trace) const {
  Mat pre0 = fc0.forward(feat);
  Mat a0 = pre0.array().tanh().matrix();
  Mat pre1 = fc1.forward(a0);
  Mat a1 = pre1.array().tanh().matrix();
  Mat out = fc2.forward(a1);
  const int n = int(feat.rows());
  sigma.resize(n);
  rgb.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    sigma[i] = softplus(out(i, 0));
    for (int c = 0; c < 3; ++c) rgb(i, c) = sigmoid(out(i, c + 1));
  }
  if (trace) {
    trace->x0 = feat;
    trace->pre0 = std::move(pre0);
    trace->a0 = std::move(a0);
    trace->pre1 = std::move(pre1);
    trace->a1 = std::move(a1);
    trace->out = std::move(out);
  }
}

Mat Decoder::backward(const Trace& trace, const Vec& dsigma, const Mat& drgb) {
  const int n = int(trace.out.rows());
  Mat gout(n, 4);
  for (int i = 0; i < n; ++i) {
    gout(i, 0) = dsigma[i] * sigmoid(trace.out(i, 0));  // d softplus
    for (int c = 0; c < 3; ++c) {
      const double s = sigmoid(trace.out(i, c + 1));
      gout(i, c + 1) = drgb(i, c) * s * (1.0 - s);
    }
  }
  Mat ga1 = fc2.backward(trace.a1, gout);
  ga1.array() *= (1.0 - trace.a1.array().square());  // d tanh
  Mat ga0 = fc1.backward(trace.a0, ga1);
  ga0.array() *= (1.0 - trace.a0.array().square());
  return fc0.backward(trace.x0, ga0);
}

void Decoder::collect(nn::ParamRefs& out, const std::string& prefix, bool frozen) {
  fc0.collect(out, prefix + ".fc0", frozen);
  fc1.collect(out, prefix + ".fc1", frozen);
  fc2.collect(out, prefix + ".fc2", frozen);
}

void field_query(const TriPlane& tp, const Decoder& dec, const Eigen::Vector3d& p,
                 double& sigma, Eigen::Vector3d& rgb) {
  Mat feat = sample_features(tp, {p});
  Vec s;
  Mat c;
  dec.forward(feat, s, c);
  sigma = s[0];
  rgb = Eigen::Vector3d(c(0, 0), c(0, 1), c(0, 2));
}

}  // namespace dr3d

// SPDX-License-Identifier: Apache-2.0
#include "dr3d/renderer.hpp"

#include <cmath>

namespace dr3d {

CompositeResult composite_ray(const Vec& sigma, const Mat& rgb, const Vec& ts,
                              const Vec& deltas, double far) {
  const int n = int(sigma.size());
  CompositeResult r;
  r.weight = Vec::Zero(n);
  r.color.setZero();
  r.depth = 0.0;
  r.opacity = 0.0;
  double T = 1.0;
  for (int i = 0; i < n; ++i) {
    const double a = 1.0 - std::exp(-sigma[i] * deltas[i]);
    const double w = T * a;
    r.weight[i] = w;
    r.color += w * Eigen::Vector3d(rgb(i, 0), rgb(i, 1), rgb(i, 2));
    r.depth += w * ts[i];
    r.opacity += w;
    T *= 1.0 - a;
  }
  r.depth += (1.0 - r.opacity) * far;
  return r;
}

RenderOutput render(const TriPlane& tp, const Decoder& dec, const CameraPose& pose,
                    const RenderParams& params, std::uint64_t strat_seed,
                    RenderTrace* trace) {
  const int h = params.h, w = params.w, n = params.n_samples;
  const int N = h * w;
  Rng rng(strat_seed);

  RayBundle rays = generate_rays(pose, h, w);
  Vec ts(std::size_t(N) * n), deltas(std::size_t(N) * n);
  std::vector<Eigen::Vector3d> pts(std::size_t(N) * n);
  const double span = params.far - params.near;
  for (int p = 0; p < N; ++p) {
    const std::size_t base = std::size_t(p) * n;
    for (int i = 0; i < n; ++i)
      ts[base + i] = params.near + (i + rng.uniform()) * span / n;
    for (int i = 0; i + 1 < n; ++i) deltas[base + i] = ts[base + i + 1] - ts[base + i];
    deltas[base + n - 1] = params.far - ts[base + n - 1];
    for (int i = 0; i < n; ++i)
      pts[base + i] = rays.origin[std::size_t(p)] + ts[base + i] * rays.dir[std::size_t(p)];
  }

  std::vector<BilinearTap> taps;
  Mat feat = sample_features(tp, pts, trace ? &taps : nullptr);
  Vec sigma;
  Mat rgb;
  Decoder::Trace dect;
  dec.forward(feat, sigma, rgb, trace ? &dect : nullptr);

  RenderOutput out;
  out.image = Tensor(3, h, w);
  out.depth = Mat::Zero(h, w);
  out.opacity = Mat::Zero(h, w);
  Vec alpha(std::size_t(N) * n), weight(std::size_t(N) * n);
  for (int p = 0; p < N; ++p) {
    const std::size_t base = std::size_t(p) * n;
    double T = 1.0, op = 0.0, depth = 0.0;
    Eigen::Vector3d col = Eigen::Vector3d::Zero();
    for (int i = 0; i < n; ++i) {
      const double a = 1.0 - std::exp(-sigma[base + i] * deltas[base + i]);
      const double wi = T * a;
      alpha[base + i] = a;
      weight[base + i] = wi;
      col += wi * Eigen::Vector3d(rgb(base + i, 0), rgb(base + i, 1), rgb(base + i, 2));
      depth += wi * ts[base + i];
      op += wi;
      T *= 1.0 - a;
    }
    const int iy = p / w, ix = p % w;
    out.image.at(0, iy, ix) = col.x();
    out.image.at(1, iy, ix) = col.y();
    out.image.at(2, iy, ix) = col.z();
    out.depth(iy, ix) = depth + (1.0 - op) * params.far;
    out.opacity(iy, ix) = op;
  }

  if (trace) {
    trace->params = params;
    trace->pose = pose;
    trace->rays = std::move(rays);
    trace->ts = std::move(ts);
    trace->deltas = std::move(deltas);
    trace->taps = std::move(taps);
    trace->dec = std::move(dect);
    trace->sigma = std::move(sigma);
    trace->rgb = std::move(rgb);
    trace->alpha = std::move(alpha);
    trace->weight = std::move(weight);
  }
  return out;
}

void render_backward(const TriPlane& tp, Decoder& dec, const RenderTrace& trace,
                     const Tensor& dimage, const Mat& ddepth, const Mat& dopacity,
                     Tensor plane_grads[3]) {
  const int h = trace.params.h, w = trace.params.w, n = trace.params.n_samples;
  const int N = h * w;
  const double far = trace.params.far;
  const bool has_img = dimage.size() > 0;
  const bool has_depth = ddepth.size() > 0;
  const bool has_op = dopacity.size() > 0;

  Vec dsigma = Vec::Zero(std::size_t(N) * n);
  Mat drgb = Mat::Zero(std::size_t(N) * n, 3);
  Vec Tbuf(n);
  for (int p = 0; p < N; ++p) {
    const int iy = p / w, ix = p % w;
    const std::size_t base = std::size_t(p) * n;
    const double gx = has_img ? dimage.at(0, iy, ix) : 0.0;
    const double gy = has_img ? dimage.at(1, iy, ix) : 0.0;
    const double gz = has_img ? dimage.at(2, iy, ix) : 0.0;
    const double gd = has_depth ? ddepth(iy, ix) : 0.0;
    const double go = has_op ? dopacity(iy, ix) : 0.0;
    // T_i before sample i; T_{i+1} = T_i * (1 - alpha_i).
    double T = 1.0;
    for (int i = 0; i < n; ++i) {
      Tbuf[i] = T;
      T *= 1.0 - trace.alpha[base + i];
    }
    // A_i = dL/dw_i. dw_i/dsigma_i = delta_i * T_{i+1};
    // dw_j/dsigma_i = -delta_i * w_j for j > i; suffix sum handles the tail.
    double suffix = 0.0;
    for (int i = n - 1; i >= 0; --i) {
      const double wi = trace.weight[base + i];
      const double A = gx * trace.rgb(base + i, 0) + gy * trace.rgb(base + i, 1) +
                       gz * trace.rgb(base + i, 2) + gd * (trace.ts[base + i] - far) + go;
      const double Tnext = Tbuf[i] * (1.0 - trace.alpha[base + i]);
      dsigma[base + i] = trace.deltas[base + i] * (A * Tnext - suffix);
      suffix += A * wi;
      if (has_img) {
        drgb(base + i, 0) = gx * wi;
        drgb(base + i, 1) = gy * wi;
        drgb(base + i, 2) = gz * wi;
      }
    }
  }

  Mat dfeat = dec.backward(trace.dec, dsigma, drgb);
  sample_features_backward(tp, trace.taps, dfeat, plane_grads);
}

NormalsResult normals_from_depth(const Mat& depth, const CameraPose& pose) {
  const int h = int(depth.rows()), w = int(depth.cols());
  NormalsResult res;
  res.n = Tensor(3, h, w);
  res.degenerate.assign(std::size_t(h) * w, 0);

  // Camera-space back-projection: P = dir_cam * depth (depth is distance
  // along the unit ray, not z).
  std::vector<Eigen::Vector3d> P(std::size_t(h) * w);
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix)
      P[std::size_t(iy) * w + ix] =
          pixel_dir_camera(pose, h, w, iy, ix) * depth(iy, ix);

  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const int xm = std::max(ix - 1, 0), xp = std::min(ix + 1, w - 1);
      const int ym = std::max(iy - 1, 0), yp = std::min(iy + 1, h - 1);
      const Eigen::Vector3d dx = P[std::size_t(iy) * w + xp] - P[std::size_t(iy) * w + xm];
      const Eigen::Vector3d dy = P[std::size_t(yp) * w + ix] - P[std::size_t(ym) * w + ix];
      // dy runs down the image (-y in camera space), so cross(dy, dx) faces
      // the camera (+z) for front-facing surfaces.
      Eigen::Vector3d c = dy.cross(dx);
      const double len = c.norm();
      if (len < 1e-12) {
        res.n.at(0, iy, ix) = 0.0;
        res.n.at(1, iy, ix) = 0.0;
        res.n.at(2, iy, ix) = 1.0;
        res.degenerate[std::size_t(iy) * w + ix] = 1;
      } else {
        c /= len;
        res.n.at(0, iy, ix) = c.x();
        res.n.at(1, iy, ix) = c.y();
        res.n.at(2, iy, ix) = c.z();
      }
    }
  }
  return res;
}

Mat normals_from_depth_backward(const Mat& depth, const CameraPose& pose,
                                const Tensor& gn) {
  const int h = int(depth.rows()), w = int(depth.cols());
  std::vector<Eigen::Vector3d> dirs(std::size_t(h) * w);
  std::vector<Eigen::Vector3d> P(std::size_t(h) * w);
  for (int iy = 0; iy < h; ++iy)
    for (int ix = 0; ix < w; ++ix) {
      dirs[std::size_t(iy) * w + ix] = pixel_dir_camera(pose, h, w, iy, ix);
      P[std::size_t(iy) * w + ix] = dirs[std::size_t(iy) * w + ix] * depth(iy, ix);
    }

  Mat gdepth = Mat::Zero(h, w);
  for (int iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      const int xm = std::max(ix - 1, 0), xp = std::min(ix + 1, w - 1);
      const int ym = std::max(iy - 1, 0), yp = std::min(iy + 1, h - 1);
      const Eigen::Vector3d dx = P[std::size_t(iy) * w + xp] - P[std::size_t(iy) * w + xm];
      const Eigen::Vector3d dy = P[std::size_t(yp) * w + ix] - P[std::size_t(ym) * w + ix];
      Eigen::Vector3d c = dy.cross(dx);
      const double len = c.norm();
      if (len < 1e-12) continue;  // output pinned to (0,0,1); zero gradient
      const Eigen::Vector3d nvec = c / len;
      const Eigen::Vector3d g(gn.at(0, iy, ix), gn.at(1, iy, ix), gn.at(2, iy, ix));
      // d(normalize): (I - n n^T)/|c| applied to g.
      const Eigen::Vector3d gc = (g - nvec * nvec.dot(g)) / len;
      // c = dy x dx: <gc, ddy x dx> = <dx x gc, ddy>, <gc, dy x ddx> = <gc x dy, ddx>.
      const Eigen::Vector3d gdy = dx.cross(gc);
      const Eigen::Vector3d gdx = gc.cross(dy);
      gdepth(iy, xp) += dirs[std::size_t(iy) * w + xp].dot(gdx);
      gdepth(iy, xm) -= dirs[std::size_t(iy) * w + xm].dot(gdx);
      gdepth(yp, ix) += dirs[std::size_t(yp) * w + ix].dot(gdy);
      gdepth(ym, ix) -= dirs[std::size_t(ym) * w + ix].dot(gdy);
    }
  }
  return gdepth;
}

Mat gaussian_kernel(int ksize, double sigma) {
  if (ksize < 1 || ksize % 2 == 0) {
    throw ConfigError("gaussian_kernel: kernel width must be odd and positive");
  }
  const int r = ksize / 2;
  Mat k(ksize, ksize);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) {
      const double v = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      k(i + r, j + r) = v;
      sum += v;
    }
  k /= sum;
  return k;
}

namespace {
inline int reflect101(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}
}  // namespace

Mat gaussian_blur(const Mat& m, int ksize, double sigma) {
  const Mat k = gaussian_kernel(ksize, sigma);
  const int r = ksize / 2;
  const int h = int(m.rows()), w = int(m.cols());
  Mat out = Mat::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j)
          acc += k(i + r, j + r) * m(reflect101(y + i, h), reflect101(x + j, w));
      out(y, x) = acc;
    }
  return out;
}

Mat gaussian_blur_adjoint(const Mat& g, int ksize, double sigma) {
  const Mat k = gaussian_kernel(ksize, sigma);
  const int r = ksize / 2;
  const int h = int(g.rows()), w = int(g.cols());
  Mat out = Mat::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gv = g(y, x);
      for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j)
          out(reflect101(y + i, h), reflect101(x + j, w)) += k(i + r, j + r) * gv;
    }
  return out;
}

}  // namespace dr3d

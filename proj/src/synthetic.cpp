// SPDX-License-Identifier: Apache-2.0
#include "dr3d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dr3d/common.hpp"

namespace dr3d {
namespace {

struct Hit {
  double t = -1.0;
  Eigen::Vector3d normal{0, 0, 0};
  Eigen::Vector3d color{0, 0, 0};
};

// Smallest positive root of |(o + t*d - c) / a|^2 = 1. Returns -1 on miss.
double ray_ellipsoid(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                     const Eigen::Vector3d& c, const Eigen::Vector3d& a) {
  const Eigen::Vector3d q = (o - c).cwiseQuotient(a);
  const Eigen::Vector3d r = d.cwiseQuotient(a);
  const double A = r.squaredNorm();
  const double B = q.dot(r);
  const double C = q.squaredNorm() - 1.0;
  const double disc = B * B - A * C;
  if (disc < 0.0) return -1.0;
  const double sq = std::sqrt(disc);
  const double t0 = (-B - sq) / A;
  if (t0 > 1e-9) return t0;
  const double t1 = (-B + sq) / A;
  if (t1 > 1e-9) return t1;
  return -1.0;
}

void consider(Hit& best, double t, const Eigen::Vector3d& p,
              const Eigen::Vector3d& c, const Eigen::Vector3d& a,
              const Eigen::Vector3d& color) {
  if (t <= 0.0 || (best.t > 0.0 && t >= best.t)) return;
  best.t = t;
  best.normal = (p - c).cwiseQuotient(a.cwiseProduct(a)).normalized();
  best.color = color;
}

Hit trace(const SceneParams& sc, const Eigen::Vector3d& o,
          const Eigen::Vector3d& d) {
  Hit best;
  if (sc.head_axes.minCoeff() > 0.0) {
    double t = ray_ellipsoid(o, d, sc.head_center, sc.head_axes);
    if (t > 0.0) consider(best, t, o + t * d, sc.head_center, sc.head_axes, sc.skin_color);
  }
  if (sc.eye_radius > 0.0) {
    const Eigen::Vector3d ra(sc.eye_radius, sc.eye_radius, sc.eye_radius);
    for (int side = -1; side <= 1; side += 2) {
      Eigen::Vector3d c = sc.head_center + Eigen::Vector3d(side * sc.eye_offset.x(),
                                                           sc.eye_offset.y(),
                                                           sc.eye_offset.z());
      double t = ray_ellipsoid(o, d, c, ra);
      if (t > 0.0) consider(best, t, o + t * d, c, ra, sc.eye_color);
    }
  }
  if (sc.nose_axes.minCoeff() > 0.0) {
    const Eigen::Vector3d c = sc.head_center + sc.nose_center;
    double t = ray_ellipsoid(o, d, c, sc.nose_axes);
    if (t > 0.0) consider(best, t, o + t * d, c, sc.nose_axes, sc.nose_color);
  }
  return best;
}

double quantize(double v, int levels) {
  const double q = std::round(v * (levels - 1)) / (levels - 1);
  return clamp(q, 0.0, 1.0);
}

double lerp(double a, double b, double u) { return a + (b - a) * u; }

}  // namespace

double auto_head_scale(double radius, double fov) {
  // Fit the tallest warped head into ~70% of the frame half-height. 0.60 is
  // the nominal world half-extent of a fully elongated head at scale 1.
  return 0.7 * radius * std::tan(0.5 * fov) / 0.60;
}

SceneParams sample_scene(const std::string& kind, Rng& rng,
                         const SyntheticStyle& style, double scale) {
  if (kind != "source" && kind != "target")
    throw ConfigError("scene kind must be 'source' or 'target', got '" + kind + "'");
  if (style.palette_levels < 2)
    throw ConfigError("palette_levels must be >= 2");
  const double s = scale;
  SceneParams sc;
  sc.head_axes = s * Eigen::Vector3d(0.30 * rng.uniform(0.92, 1.08),
                                     0.38 * rng.uniform(0.92, 1.08),
                                     0.31 * rng.uniform(0.92, 1.08));
  for (int c = 0; c < 3; ++c)
    sc.skin_color[c] = clamp(sc.skin_color[c] + rng.uniform(-0.08, 0.08), 0.05, 0.95);
  sc.eye_radius = s * rng.uniform(0.048, 0.062);
  sc.eye_offset = Eigen::Vector3d(s * rng.uniform(0.115, 0.145),
                                  s * rng.uniform(0.085, 0.115),
                                  sc.head_axes.z() * rng.uniform(0.82, 0.88));
  double gray = rng.uniform(0.03, 0.10);
  sc.eye_color = Eigen::Vector3d(gray, gray, gray * rng.uniform(1.0, 1.3));
  sc.nose_center = Eigen::Vector3d(0.0, -s * rng.uniform(0.03, 0.06),
                                   sc.head_axes.z() * rng.uniform(0.92, 1.00));
  sc.nose_axes = s * Eigen::Vector3d(rng.uniform(0.040, 0.052),
                                     rng.uniform(0.052, 0.068),
                                     rng.uniform(0.065, 0.085));
  sc.nose_color = sc.skin_color * rng.uniform(0.80, 0.90);

  if (kind == "target") {
    // Caricature warps: long nose, stretched skull, oversized raised eyes,
    // paler skin. warp_strength = 0 collapses them back to the source shape.
    const double ws = style.warp_strength;
    sc.nose_axes.x() *= lerp(1.0, rng.uniform(1.25, 1.60), ws);
    sc.nose_axes.y() *= lerp(1.0, rng.uniform(1.25, 1.60), ws);
    sc.nose_axes.z() *= lerp(1.0, rng.uniform(1.70, 2.40), ws);
    sc.nose_center.z() *= lerp(1.0, rng.uniform(1.05, 1.15), ws);
    sc.head_axes.y() *= lerp(1.0, rng.uniform(1.18, 1.42), ws);
    sc.eye_radius *= lerp(1.0, rng.uniform(1.35, 1.75), ws);
    sc.eye_offset.y() += ws * s * rng.uniform(0.02, 0.05);
    const Eigen::Vector3d pale(0.93, 0.80, 0.66);
    const double mix = ws * rng.uniform(0.30, 0.60);
    for (int c = 0; c < 3; ++c)
      sc.skin_color[c] = lerp(sc.skin_color[c], pale[c], mix);
    sc.stylized = true;
    sc.palette_levels = style.palette_levels;
    sc.edge_threshold = style.edge_threshold;
    sc.edge_darkness = style.edge_darkness;
  }
  return sc;
}

SyntheticSample render_scene(const SceneParams& sc, const CameraPose& pose,
                             int res, double far_fill) {
  if (res < 4) throw ConfigError("synthetic render resolution must be >= 4");
  SyntheticSample out;
  out.pose = pose;
  out.image = Tensor(3, res, res);
  out.depth = Mat::Constant(res, res, far_fill);

  RayBundle rays = generate_rays(pose, res, res);
  const Eigen::Vector3d light = Eigen::Vector3d(0.4, 0.6, 0.9).normalized();
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const int pix = y * res + x;
      const Eigen::Vector3d& o = rays.origin[pix];
      const Eigen::Vector3d& d = rays.dir[pix];
      Hit h = trace(sc, o, d);
      if (h.t <= 0.0) continue;
      out.depth(y, x) = h.t;
      const double diffuse = std::max(0.0, h.normal.dot(light));
      const double shade = 0.35 + 0.65 * diffuse;
      for (int c = 0; c < 3; ++c)
        out.image.at(c, y, x) = clamp(h.color[c] * shade, 0.0, 0.999);
    }
  }

  if (sc.stylized) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x)
          out.image.at(c, y, x) = quantize(out.image.at(c, y, x), sc.palette_levels);
    // Outline where depth steps exceed the threshold (silhouettes and the
    // nose/eye boundaries). Both sides of a step darken, giving a 2px stroke.
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        bool edge = false;
        const double dd = out.depth(y, x);
        if (x + 1 < res && std::abs(out.depth(y, x + 1) - dd) > sc.edge_threshold) edge = true;
        if (y + 1 < res && std::abs(out.depth(y + 1, x) - dd) > sc.edge_threshold) edge = true;
        if (x > 0 && std::abs(out.depth(y, x - 1) - dd) > sc.edge_threshold) edge = true;
        if (y > 0 && std::abs(out.depth(y - 1, x) - dd) > sc.edge_threshold) edge = true;
        if (edge)
          for (int c = 0; c < 3; ++c) out.image.at(c, y, x) *= sc.edge_darkness;
      }
    }
  }
  return out;
}

SyntheticDomain make_synthetic_domain(const std::string& kind, int n,
                                      std::uint64_t seed, int res,
                                      double radius, double fov,
                                      const PosePrior& prior, double far_fill,
                                      const SyntheticStyle& style) {
  if (n <= 0) throw ConfigError("synthetic domain size must be positive");
  const double scale = style.head_scale > 0.0 ? style.head_scale
                                              : auto_head_scale(radius, fov);
  SyntheticDomain dom;
  dom.kind = kind;
  dom.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng scene_rng(seed, RngStream::kData, (std::uint64_t)i, 0);
    Rng pose_rng(seed, RngStream::kData, (std::uint64_t)i, 1);
    SceneParams sc = sample_scene(kind, scene_rng, style, scale);
    CameraPose pose = sample_pose_prior(prior, pose_rng, radius, fov);
    dom.samples.push_back(render_scene(sc, pose, res, far_fill));
    if (i < 4) {
      // Generation-time self check: the renderer is pure, a re-render must
      // reproduce the sample bit for bit.
      Rng rng2(seed, RngStream::kData, (std::uint64_t)i, 0);
      SceneParams sc2 = sample_scene(kind, rng2, style, scale);
      SyntheticSample again = render_scene(sc2, pose, res, far_fill);
      if (std::memcmp(again.depth.data(), dom.samples[i].depth.data(),
                      sizeof(double) * (size_t)res * res) != 0 ||
          std::memcmp(again.image.data.data(), dom.samples[i].image.data.data(),
                      sizeof(double) * dom.samples[i].image.data.size()) != 0)
        throw NumericError("synthetic renderer self check failed: re-render differs");
    }
  }
  return dom;
}

}  // namespace dr3d

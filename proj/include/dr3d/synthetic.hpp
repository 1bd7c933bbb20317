// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dr3d/camera.hpp"
#include "dr3d/tensor.hpp"

namespace dr3d {

// Procedural head: ellipsoid skull, two spherical eyes, ellipsoid nose,
// Lambertian shading, black background. Closed-form ray intersections make
// depth maps exact. The target domain warps the shape parameters (long nose,
// stretched skull, oversized eyes) and stylizes the shading into a drawing
// (quantized palette, darkened depth edges).
struct SceneParams {
  Eigen::Vector3d head_center{0, 0, 0};
  Eigen::Vector3d head_axes{0.30, 0.38, 0.31};
  Eigen::Vector3d skin_color{0.85, 0.62, 0.50};
  double eye_radius = 0.055;
  Eigen::Vector3d eye_offset{0.13, 0.10, 0.26};  // mirrored in +-x
  Eigen::Vector3d eye_color{0.06, 0.06, 0.07};
  Eigen::Vector3d nose_center{0, -0.04, 0.33};
  Eigen::Vector3d nose_axes{0.045, 0.06, 0.075};
  Eigen::Vector3d nose_color{0.72, 0.50, 0.40};

  bool stylized = false;
  int palette_levels = 4;
  double edge_threshold = 0.12;  // world-space depth step marking an outline
  double edge_darkness = 0.35;   // multiplier inside outlines
};

struct SyntheticStyle {
  double head_scale = 0.0;  // 0 = auto-fit to the camera frustum
  int palette_levels = 4;
  double edge_threshold = 0.12;
  double edge_darkness = 0.35;
  double warp_strength = 1.0;  // scales the target-domain exaggerations
};

struct SyntheticSample {
  Tensor image;  // (3, res, res)
  Mat depth;     // (res, res), ray distance, background = far
  CameraPose pose;
};

struct SyntheticDomain {
  std::string kind;  // "source" or "target"
  std::vector<SyntheticSample> samples;
};

double auto_head_scale(double radius, double fov);

SceneParams sample_scene(const std::string& kind, Rng& rng,
                         const SyntheticStyle& style, double scale);

// Analytic render. far_fill is written into background depth pixels.
SyntheticSample render_scene(const SceneParams& sc, const CameraPose& pose,
                             int res, double far_fill);

// Deterministic in (kind, n, seed). Each sample's depth is re-rendered and
// byte-compared for the first few items as a generation-time self check.
SyntheticDomain make_synthetic_domain(const std::string& kind, int n,
                                      std::uint64_t seed, int res,
                                      double radius, double fov,
                                      const PosePrior& prior, double far_fill,
                                      const SyntheticStyle& style);

}  // namespace dr3d

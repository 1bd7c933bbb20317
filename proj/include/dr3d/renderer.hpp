// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dr3d/camera.hpp"
#include "dr3d/triplane.hpp"

namespace dr3d {

struct RenderParams {
  int h = 32, w = 32;
  int n_samples = 32;
  double near = 0.9, far = 4.5;
};

struct RenderOutput {
  Tensor image;  // (3, h, w), values in (0,1), black background
  Mat depth;     // (h, w); expected ray distance, background-filled with far
  Mat opacity;   // (h, w) in [0,1)
};

// Everything the backward pass needs. Sample index layout: pixel-major,
// global index = (iy*w + ix)*n_samples + i.
struct RenderTrace {
  RenderParams params;
  CameraPose pose;
  RayBundle rays;
  Vec ts, deltas;         // (N*n)
  std::vector<BilinearTap> taps;
  Decoder::Trace dec;
  Vec sigma;              // (N*n)
  Mat rgb;                // (N*n, 3)
  Vec alpha, weight;      // (N*n)
};

// Stratified samples along [near, far]: t_i = near + (i+u_i)*(far-near)/n.
// Deltas are forward differences with the last one closing at far, so they
// sum to far - t_0: the head segment [near, t_0) before the first jittered
// sample carries no mass, and per-ray transmittance depends on that jitter.
RenderOutput render(const TriPlane& tp, const Decoder& dec, const CameraPose& pose,
                    const RenderParams& params, std::uint64_t strat_seed,
                    RenderTrace* trace = nullptr);

// Accumulates decoder parameter gradients and plane gradients (plane_grads[k]
// shaped like tp.planes[k]). Pass empty matrices to skip a head.
void render_backward(const TriPlane& tp, Decoder& dec, const RenderTrace& trace,
                     const Tensor& dimage, const Mat& ddepth, const Mat& dopacity,
                     Tensor plane_grads[3]);

// Single-ray compositing, exposed for direct property tests.
// Returns per-sample weights; accumulates color/depth/opacity.
struct CompositeResult {
  Vec weight;
  Eigen::Vector3d color;
  double depth;
  double opacity;
};
CompositeResult composite_ray(const Vec& sigma, const Mat& rgb, const Vec& ts,
                              const Vec& deltas, double far);

// Camera-space surface normals by cross products of back-projected central
// differences. Fronto-parallel surfaces map to (0,0,1). Degenerate cross
// products yield (0,0,1) and are flagged.
struct NormalsResult {
  Tensor n;  // (3, h, w), unit vectors
  std::vector<std::uint8_t> degenerate;  // (h*w)
};
NormalsResult normals_from_depth(const Mat& depth, const CameraPose& pose);

// d(loss)/d(depth) given d(loss)/d(normals); recomputes forward internals.
Mat normals_from_depth_backward(const Mat& depth, const CameraPose& pose,
                                const Tensor& gn);

// Normalized Gaussian on the integer grid; ksize must be odd.
Mat gaussian_kernel(int ksize, double sigma);
// Convolution with reflect-101 padding. Preserves constants exactly.
Mat gaussian_blur(const Mat& m, int ksize, double sigma);
// Adjoint of gaussian_blur (they differ at the borders).
Mat gaussian_blur_adjoint(const Mat& g, int ksize, double sigma);

}  // namespace dr3d

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dr3d/nn.hpp"
#include "dr3d/tensor.hpp"

namespace dr3d {

// Three axis-aligned feature planes (XY, XZ, YZ), each (C, R, R), spanning
// [-extent, extent]^3. A point is normalized into [-1,1]^3, projected onto
// each plane, bilinearly sampled, and the three samples are summed.
// Out-of-range coordinates clamp to the border.
struct TriPlane {
  int res = 32;
  int channels = 16;
  double extent = 1.0;
  // planes[k] is (channels, res, res); k=0 XY, k=1 XZ, k=2 YZ.
  Tensor planes[3];

  TriPlane() = default;
  TriPlane(int res_, int channels_, double extent_);

  // Plane-space (u, v) for point p; u is the fast (column) axis.
  // XY: (x, y), XZ: (x, z), YZ: (y, z).
  void set_zero();
};

// One bilinear tap: plane k, integer cell corner (x0, y0), corner weights.
struct BilinearTap {
  int x0, y0;
  double fx, fy;  // fractional position inside the cell
};

// features: (n, channels). taps (one per plane, per point) are returned so
// the backward pass can scatter into plane gradients without recomputation.
Mat sample_features(const TriPlane& tp, const std::vector<Eigen::Vector3d>& pts,
                    std::vector<BilinearTap>* taps = nullptr);

// Scatter-add dfeat (n, channels) back into plane gradients.
void sample_features_backward(const TriPlane& tp, const std::vector<BilinearTap>& taps,
                              const Mat& dfeat, Tensor grads[3]);

// MLP head over summed plane features: two hidden layers (tanh) and a linear
// output layer producing [density_raw, r_raw, g_raw, b_raw]. density =
// softplus(density_raw), color = sigmoid(rgb_raw). The output density bias
// starts at -1 so fresh fields render mostly empty.
struct Decoder {
  nn::Dense fc0, fc1, fc2;

  void init(int in_channels, int hidden, Rng& rng);

  struct Trace {
    Mat x0, a0, a1;   // input and hidden activations (post-tanh)
    Mat pre0, pre1;   // hidden pre-activations
    Mat out;          // raw 4-channel output
  };

  // feat: (n, C) -> sigma: (n), rgb: (n, 3)
  void forward(const Mat& feat, Vec& sigma, Mat& rgb, Trace* trace = nullptr) const;
  // dsigma: (n), drgb: (n,3) -> returns dfeat (n, C); accumulates param grads.
  Mat backward(const Trace& trace, const Vec& dsigma, const Mat& drgb);

  void collect(nn::ParamRefs& out, const std::string& prefix, bool frozen = false);
};

// Single-point convenience used by tests and probes.
void field_query(const TriPlane& tp, const Decoder& dec, const Eigen::Vector3d& p,
                 double& sigma, Eigen::Vector3d& rgb);

}  // namespace dr3d

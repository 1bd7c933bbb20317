// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dr3d/camera.hpp"
#include "dr3d/nn.hpp"

namespace dr3d {

struct PoseEstimatorConfig {
  int resolution = 32;
  int base_channels = 16;
  int n_blocks = 4;
};

// Image -> (yaw, pitch). Stride-2 conv stack plus a two-unit linear head.
// estimate() clamps to the pose prior support; the raw head output (used by
// training losses) is unclamped so gradients keep flowing.
struct PoseEstimator {
  PoseEstimatorConfig cfg;
  PosePrior prior;
  std::vector<nn::Conv2d> convs;
  nn::Dense head;

  static constexpr double kSlope = 0.2;

  void init(const PoseEstimatorConfig& cfg_, const PosePrior& prior_, Rng& rng);

  struct Trace {
    std::vector<Mat> cols;
    std::vector<Tensor> pres;
    Mat flat;
    Eigen::Vector2d raw;
  };

  Eigen::Vector2d forward(const Tensor& img, Trace* tr = nullptr) const;
  // Clamped to the prior box; the everyday inference entry point.
  Eigen::Vector2d estimate(const Tensor& img) const;
  // dL/draw -> parameter grads + dL/dimage.
  Tensor backward(const Trace& tr, const Eigen::Vector2d& graw,
                  const Tensor& img);

  void collect(nn::ParamRefs& out, const std::string& prefix);
};

struct PoseBatch {
  std::vector<Tensor> images;
  std::vector<Eigen::Vector2d> poses;
};

// One supervised Adam step on squared-Euclidean pose error (raw head output,
// no clamping). Returns the pre-step batch loss.
double train_pose_step(PoseEstimator& p, const PoseBatch& batch, nn::Adam& opt);

}  // namespace dr3d

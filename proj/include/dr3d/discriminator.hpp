// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dr3d/camera.hpp"
#include "dr3d/nn.hpp"

namespace dr3d {

struct DiscriminatorConfig {
  int resolution = 32;
  int base_channels = 32;
  int n_blocks = 4;
  int pose_embed_dim = 8;
  int freeze_blocks = 0;  // first k conv blocks excluded from updates
};

// Pose-conditional convolutional critic. The (yaw, pitch) pair is linearly
// embedded and concatenated as constant extra input channels; stride-2 conv
// blocks with leaky ReLU reduce to a linear head producing one logit.
struct Discriminator {
  DiscriminatorConfig cfg;
  nn::Dense pose_embed;  // 2 -> pose_embed_dim
  std::vector<nn::Conv2d> convs;
  nn::Dense head;

  static constexpr double kSlope = 0.2;

  void init(const DiscriminatorConfig& cfg_, Rng& rng);

  struct Trace {
    Tensor x0;                // image + broadcast embedding
    Mat emb_in;               // (1,2) pose input
    std::vector<Mat> cols;    // im2col per block
    std::vector<Tensor> pres; // pre-activations per block
    Mat flat;                 // (1, features) input to the head
    double logit = 0.0;
  };

  double discriminate(const Tensor& img, const CameraPose& pose,
                      Trace* tr = nullptr) const;
  // dL/dlogit -> parameter grads + dL/dimage (3 channels).
  Tensor backward(const Trace& tr, double glogit);
  // ||d logit / d image||^2 for the traced input; accumulates
  // d(coef * penalty)/d(params) into the gradient slots. The masks of the
  // leaky ReLUs are treated as locally constant, exact almost everywhere.
  double r1_penalty(const Trace& tr, double coef);

  // dL/d(trace.flat) -> dL/dimage without touching parameter grads; lets the
  // pre-head activations serve as a perceptual feature target.
  Tensor features_input_grad(const Trace& tr, const Mat& gflat) const;

  void collect(nn::ParamRefs& out, const std::string& prefix);

 private:
  Tensor input_grad(const Trace& tr) const;  // d logit / d x0
};

}  // namespace dr3d

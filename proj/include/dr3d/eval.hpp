// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "dr3d/losses.hpp"
#include "dr3d/nn.hpp"
#include "dr3d/tensor.hpp"

namespace dr3d {

// Fixed random conv net used as the measurement basis for the distribution
// metrics. Seeded, never trained, so scores are comparable across runs.
class FeatureExtractor {
 public:
  FeatureExtractor(int feature_dim, std::uint64_t seed);
  int feature_dim() const { return int(head_.W.rows()); }
  Vec features(const Tensor& image) const;
  Mat features_batch(const std::vector<Tensor>& images) const;  // (N, F)

 private:
  std::vector<nn::Conv2d> convs_;
  nn::Dense head_;
};

// Frechet distance between Gaussians fitted to the rows of a and b
// (unbiased covariances). Exact zero when a == b up to eigensolver noise.
double fid(const Mat& a, const Mat& b);

// Unbiased MMD^2 with kernel (x.y/F + 1)^3, averaged over consecutive
// equal-size blocks of at most `block` rows.
double kid(const Mat& a, const Mat& b, int block = 1000);

// Bootstrap mean and standard error of kid over resampled rows.
std::pair<double, double> kid_bootstrap(const Mat& a, const Mat& b, int n_boot,
                                        std::uint64_t seed, int block = 1000);

struct GeometryReport {
  double depth_mse = 0.0;  // blurred, per-pair median-aligned
  double pose_mse = 0.0;
};

GeometryReport geometry_error(const std::vector<Mat>& pred_depth,
                              const std::vector<Mat>& gt_depth,
                              const std::vector<Eigen::Vector2d>& pred_pose,
                              const std::vector<Eigen::Vector2d>& gt_pose,
                              const DepthBlurSpec& spec);

}  // namespace dr3d

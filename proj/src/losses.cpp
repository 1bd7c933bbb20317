// SPDX-License-Identifier: Apache-2.0
#include "dr3d/losses.hpp"

namespace dr3d {

double depth_similarity(const Mat& d1, const Mat& d2, const DepthBlurSpec& spec,
                        Mat* g1) {
  if (d1.rows() != d2.rows() || d1.cols() != d2.cols())
    throw ConfigError("depth_similarity: depth map shapes differ");
  const Mat b1 = gaussian_blur(d1, spec.ksize, spec.sigma);
  const Mat b2 = gaussian_blur(d2, spec.ksize, spec.sigma);
  const Mat diff = b1 - b2;
  const double n = double(d1.size());
  if (g1) *g1 = gaussian_blur_adjoint(Mat(2.0 / n * diff), spec.ksize, spec.sigma);
  return diff.array().square().sum() / n;
}

double normal_smoothness(const Tensor& n, Tensor* gn) {
  const double scale = 1.0 / (double(n.h) * double(n.w));
  if (gn) {
    *gn = Tensor(n.c, n.h, n.w);
  }
  double acc = 0.0;
  for (int c = 0; c < n.c; ++c) {
    for (int y = 0; y < n.h; ++y) {
      for (int x = 0; x < n.w; ++x) {
        if (x + 1 < n.w) {
          const double d = n.at(c, y, x + 1) - n.at(c, y, x);
          acc += d * d;
          if (gn) {
            gn->at(c, y, x + 1) += 2.0 * scale * d;
            gn->at(c, y, x) -= 2.0 * scale * d;
          }
        }
        if (y + 1 < n.h) {
          const double d = n.at(c, y + 1, x) - n.at(c, y, x);
          acc += d * d;
          if (gn) {
            gn->at(c, y + 1, x) += 2.0 * scale * d;
            gn->at(c, y, x) -= 2.0 * scale * d;
          }
        }
      }
    }
  }
  return acc * scale;
}

double pose_loss(const std::vector<Eigen::Vector2d>& target,
                 const std::vector<Eigen::Vector2d>& pred,
                 std::vector<Eigen::Vector2d>* gpred) {
  if (target.size() != pred.size() || target.empty())
    throw ConfigError("pose_loss: batch sizes differ or empty");
  const double bn = double(target.size());
  double acc = 0.0;
  if (gpred) gpred->assign(pred.size(), Eigen::Vector2d::Zero());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const Eigen::Vector2d e = pred[i] - target[i];
    acc += e.squaredNorm();
    if (gpred) (*gpred)[i] = 2.0 * e / bn;
  }
  return acc / bn;
}

}  // namespace dr3d

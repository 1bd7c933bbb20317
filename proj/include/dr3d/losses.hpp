// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dr3d/renderer.hpp"

namespace dr3d {

// Non-saturating logistic GAN objectives.
inline double adv_loss_g(double logit_fake) { return softplus(-logit_fake); }
inline double adv_loss_d(double logit_real, double logit_fake) {
  return softplus(logit_fake) + softplus(-logit_real);
}
// d adv_loss_g / d logit_fake
inline double adv_loss_g_grad(double logit_fake) { return -sigmoid(-logit_fake); }
// d adv_loss_d / d logit, per term
inline double adv_loss_d_grad_fake(double logit_fake) { return sigmoid(logit_fake); }
inline double adv_loss_d_grad_real(double logit_real) { return -sigmoid(-logit_real); }

struct DepthBlurSpec {
  int ksize = 15;
  double sigma = 5.0;
};

// Mean squared difference of Gaussian-blurred depth maps. If g1 is non-null
// it receives dL/d(d1) via the blur adjoint.
double depth_similarity(const Mat& d1, const Mat& d2, const DepthBlurSpec& spec,
                        Mat* g1 = nullptr);

// Mean over pixels of squared forward-difference gradients, summed over the
// three normal components. gn (if given) receives dL/dn.
double normal_smoothness(const Tensor& n, Tensor* gn = nullptr);

// Batch mean of squared Euclidean distance between (yaw, pitch) pairs.
// gpred (if given) receives dL/dpred.
double pose_loss(const std::vector<Eigen::Vector2d>& target,
                 const std::vector<Eigen::Vector2d>& pred,
                 std::vector<Eigen::Vector2d>* gpred = nullptr);

struct GeometricWeights {
  double alpha = 1.0;  // depth similarity
  double beta = 1.0;   // normal smoothness
  double gamma = 1.0;  // pose consistency
};

// Weighted sum alpha*L_d + beta*L_n + gamma*L_p from precomputed terms.
inline double geometric_loss(const GeometricWeights& w, double l_depth,
                             double l_normal, double l_pose) {
  return w.alpha * l_depth + w.beta * l_normal + w.gamma * l_pose;
}

}  // namespace dr3d

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dr3d/config.hpp"
#include "dr3d/discriminator.hpp"
#include "dr3d/generator.hpp"
#include "dr3d/pose_estimator.hpp"

namespace dr3d {

// Settings for one inversion job. The critic pointer is only consulted when
// feature_weight > 0, in which case the objective adds a pre-head critic
// feature MSE on top of the pixel MSE.
struct InversionSpec {
  int invert_steps = 300;
  int pivotal_steps = 300;
  double invert_lr = 0.05;
  double pivotal_lr = 0.003;
  int mean_w_samples = 1024;
  std::uint64_t seed = 1;
  RenderParams rp;
  CameraPose base_pose;  // yaw/pitch overwritten by the estimated pose
  double feature_weight = 0.0;
  const Discriminator* critic = nullptr;
};

InversionSpec inversion_spec(const RunConfig& cfg);

// Output of the two-stage inversion. `trace` logs the best objective seen so
// far after every evaluation, so it is non-increasing by construction; the
// first stage1_len entries belong to the latent stage.
struct InversionResult {
  Vec w_star, zd_star;
  CameraPose pose;       // estimated camera, clamped to the prior box
  Generator tuned;       // generator after pivotal tuning
  RenderParams rp;
  std::uint64_t render_seed = 0;
  Tensor reconstruction;  // render of `tuned` at `pose` with `render_seed`
  double stage1_error = 0.0;
  double stage2_error = 0.0;
  std::vector<double> trace;
  int stage1_len = 0;

  void save(const std::string& path) const;
  static InversionResult load(const std::string& path);
};

// Stage 1: estimate the camera with the pose net, then optimize (w, z_d) by
// Adam on the reconstruction objective with the generator frozen. Stage 2:
// freeze (w*, z_d*) and finetune the synthesis/decoder/deformation weights on
// the same objective. Both stages keep best-so-far snapshots, so the second
// stage can never end above the first-stage optimum.
InversionResult invert(const Tensor& image, const Generator& g,
                       const PoseEstimator& p, const InversionSpec& spec);

// Render the tuned generator at a new camera. At the inversion's own pose the
// output is bit-identical to the stored reconstruction (same stratification
// seed, deterministic pipeline).
RenderOutput novel_view(const InversionResult& inv, const CameraPose& pose_new);

// Linear attribute direction in w space with a confidence flag from a
// held-out split.
struct EditDirection {
  Vec direction;  // unit norm
  std::string attribute;
  double heldout_accuracy = 0.0;
  bool low_confidence = false;

  void save(const std::string& path) const;
  static EditDirection load(const std::string& path);
};

// Below this held-out accuracy a fitted direction is flagged low-confidence.
inline constexpr double kLowConfidenceAccuracy = 0.65;

// Full-batch logistic regression (ridge 1e-4, gradient norm tolerance 1e-6);
// the direction is the normalized weight vector of a fit on all samples and
// points toward label 1. Confidence comes from a stratified 75/25 refit.
// Requires at least 10 samples of each label.
EditDirection find_edit_direction(const std::vector<Vec>& ws,
                                  const std::vector<int>& labels,
                                  const std::string& attribute,
                                  std::uint64_t seed);

// w' = w + strength * direction.
Vec edit(const Vec& w, const EditDirection& dir, double strength);

}  // namespace dr3d

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dr3d/checkpoint.hpp"
#include "dr3d/config.hpp"
#include "dr3d/discriminator.hpp"
#include "dr3d/generator.hpp"
#include "dr3d/losses.hpp"
#include "dr3d/pose_estimator.hpp"
#include "dr3d/synthetic.hpp"

namespace dr3d {

struct Dataset {
  std::vector<Tensor> images;
  std::vector<Eigen::Vector2d> poses;  // aligned with images; empty if unknown
  bool has_poses() const { return !poses.empty(); }
};

Dataset dataset_from_domain(const SyntheticDomain& dom);

// One JSONL line per training iteration. wall_ms is informational only and
// excluded from reproducibility comparisons.
struct IterationLog {
  std::int64_t iteration = 0;
  std::string phase;
  double loss_total = 0;   // adv_g + alpha*depth + beta*normal + gamma*pose_g
  double loss_adv_g = 0;
  double loss_depth = 0;   // unweighted component values
  double loss_normal = 0;
  double loss_pose_g = 0;
  double loss_d = 0;
  double r1 = 0;
  double loss_p = 0;       // pose-net step loss
  double wall_ms = 0;

  std::string to_json() const;
  static IterationLog from_json(const std::string& line);
  // Field-wise equality ignoring wall_ms; used by reproducibility checks.
  bool same_losses(const IterationLog& o) const;
};

// Alternating trainer. Pretraining fits generator, critic, and pose net on a
// posed photo-domain dataset (adversarial + supervised pose). Adaptation
// freezes a generator snapshot, then per iteration takes one pose-net step on
// generator pseudo labels and one adversarial generator/critic step on the
// unposed drawing-domain dataset, with depth-similarity, normal-smoothness,
// and pose-consistency terms tying the adapted generator to its snapshot.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);

  IterationLog pretrain_iteration(const Dataset& source);
  void begin_adaptation();
  IterationLog adapt_iteration(const Dataset& target);

  void save_checkpoint(const std::string& path);
  // cfg_override, when given, must describe the same architecture; its
  // training knobs (weights, rates, iteration counts, seeds) replace the
  // checkpointed ones.
  static Trainer load_checkpoint(const std::string& path,
                                 const RunConfig* cfg_override = nullptr);

  const RunConfig& config() const { return cfg_; }
  const std::string& phase() const { return phase_; }
  std::int64_t iteration() const { return iter_; }

  Generator& generator() { return g_; }
  const Generator& photo_generator() const { return g_photo_; }
  PoseEstimator& pose_net() { return p_; }
  Discriminator& critic() { return d_; }

  // Parameter sets as the optimizers see them (frozen flags included).
  nn::ParamRefs gen_params(bool deform_frozen);
  nn::ParamRefs critic_params();
  nn::ParamRefs pose_params();

 private:
  PoseBatch build_pseudo_batch(std::int64_t it);
  struct RealBatch {
    std::vector<Tensor> images;
    std::vector<Eigen::Vector2d> pose_vecs;
    std::vector<CameraPose> poses;
  };
  RealBatch draw_real_batch(const Dataset& data, std::int64_t it, int flip_lane,
                            int index_lane);
  CameraPose to_camera(const Eigen::Vector2d& yaw_pitch) const;

  RunConfig cfg_;
  Generator g_, g_photo_;
  Discriminator d_;
  PoseEstimator p_;
  nn::Adam opt_g_, opt_d_, opt_p_;
  std::int64_t iter_ = 0;  // within the current phase
  std::string phase_ = "pretrain";
  bool has_photo_ = false;
};

}  // namespace dr3d

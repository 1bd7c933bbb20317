// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dr3d/camera.hpp"
#include "dr3d/discriminator.hpp"
#include "dr3d/generator.hpp"
#include "dr3d/pose_estimator.hpp"
#include "dr3d/renderer.hpp"
#include "dr3d/synthetic.hpp"

namespace dr3d {

// Everything a run needs, grouped into the sections of the config file.
// Unknown sections or keys are errors, so typos fail loudly.
struct RunConfig {
  // [run]
  int resolution = 32;
  std::uint64_t seed = 1;

  // [camera]
  double cam_radius = 2.7;
  double cam_fov_deg = 12.0;
  double cam_near = 0.9;
  double cam_far = 4.5;
  double yaw_min = -0.5;
  double yaw_max = 0.5;
  double pitch_min = -0.3;
  double pitch_max = 0.3;

  // [generator]
  int z_dim = 64;
  int zd_dim = 16;
  int w_dim = 64;
  int mapping_layers = 4;
  int mapping_width = 64;
  int deform_width = 64;
  int base_res = 8;
  int synth_blocks = 3;
  int synth_channels = 64;
  int plane_channels = 16;
  double plane_extent = 1.0;
  int decoder_width = 64;

  // [discriminator]
  int d_base_channels = 32;
  int d_blocks = 4;
  int pose_embed_dim = 8;
  int freeze_blocks = 2;

  // [pose_net]
  int p_base_channels = 16;
  int p_blocks = 4;

  // [render]
  int n_samples = 32;

  // [loss]
  double alpha = 1.0;
  double beta = 0.05;
  double gamma = 1.0;
  double r1_weight = 1.0;
  int r1_interval = 16;
  int blur_ksize = 15;
  double blur_sigma = 5.0;

  // [optim]
  double lr_g = 0.00125;
  double lr_d = 0.00075;
  double lr_p = 0.0001;
  double adam_beta2 = 0.99;

  // [train]
  int batch_size = 32;
  int pretrain_iterations = 2000;
  int adapt_iterations = 1000;
  int checkpoint_interval = 500;
  int log_flush_interval = 25;

  // [synthetic]
  int synth_source_n = 512;
  int synth_target_n = 512;
  std::uint64_t synth_source_seed = 101;
  std::uint64_t synth_target_seed = 202;
  double head_scale = 0.0;  // 0 = auto
  int palette_levels = 4;
  double edge_threshold = 0.12;
  double edge_darkness = 0.35;
  double warp_strength = 1.0;

  // [inversion]
  int invert_steps = 300;
  int pivotal_steps = 300;
  double invert_lr = 0.05;
  double pivotal_lr = 0.003;
  int mean_w_samples = 1024;
  double feature_weight = 0.0;  // critic-feature term, 0 = pixel MSE only

  // [eval]
  int eval_samples = 256;
  int eval_feature_dim = 128;
  std::uint64_t eval_extractor_seed = 7;

  void validate() const;

  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  PoseEstimatorConfig pose_estimator_config() const;
  RenderParams render_params() const;
  PosePrior pose_prior() const;
  SyntheticStyle synthetic_style() const;
  CameraPose base_pose() const;  // frontal, run camera intrinsics

  std::string to_toml() const;
  static RunConfig from_toml(const std::string& text);
  static RunConfig load(const std::string& path);
};

// Minimal TOML subset: [section] headers, key = value lines, # comments,
// values are integers, floats, booleans, or double-quoted strings.
std::map<std::string, std::map<std::string, std::string>> parse_toml(const std::string& text);

// Throws ConfigError naming every parameter-shape field on which the two
// configs differ (resolution, generator, discriminator, pose net dims).
// Training knobs (loss weights, rates, iteration counts, seeds) may differ.
void require_same_architecture(const RunConfig& a, const RunConfig& b);

}  // namespace dr3d

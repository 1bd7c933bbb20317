// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dr3d/renderer.hpp"

namespace dr3d {

struct GeneratorConfig {
  int z_dim = 64, zd_dim = 16, w_dim = 64;
  int mapping_layers = 4, mapping_width = 64;
  int deform_width = 64;
  int base_res = 8, synth_blocks = 3, synth_channels = 64;
  int plane_res = 32, plane_channels = 16;
  double extent = 1.0;
  int decoder_width = 64;

  void validate() const;
};

// z -> w, an MLP with leaky-ReLU hidden activations and a linear last layer.
struct Mapping {
  std::vector<nn::Dense> fcs;

  void init(const GeneratorConfig& cfg, Rng& rng);
  struct Trace {
    std::vector<Mat> xs;    // input to each layer
    std::vector<Mat> pres;  // pre-activations (all but last get lrelu)
  };
  Vec forward(const Vec& z, Trace* tr = nullptr) const;
  Vec backward(const Trace& tr, const Vec& gw);
  void collect(nn::ParamRefs& out, const std::string& prefix, bool frozen = false);
};

// z_d -> additive residual over the block-0 feature map. The head is
// zero-initialized so a fresh generator is exactly deformation-free.
struct Deformation {
  nn::Dense fc0, fc1, head;
  int out_c = 0, out_res = 0;

  void init(const GeneratorConfig& cfg, Rng& rng);
  struct Trace {
    Mat x0, pre0, a0, pre1, a1;
  };
  Tensor forward(const Vec& zd, Trace* tr = nullptr) const;
  Vec backward(const Trace& tr, const Tensor& gres);
  void collect(nn::ParamRefs& out, const std::string& prefix, bool frozen = false);
};

// StyleGAN2-style modulated 3x3 conv: per-input-channel scale from an affine
// of w, weight demodulation to unit per-output-channel norm, bias, lrelu.
struct SynthBlock {
  nn::Dense affine;  // w_dim -> in_c, bias starts at 1
  nn::Conv2d conv;   // stride 1; conv.W is the base weight, conv.b the bias

  static constexpr double kDemodEps = 1e-8;
  static constexpr double kSlope = 0.2;

  void init(int in_c, int out_c, int w_dim, Rng& rng);

  // Modulated (and optionally demodulated) effective weights for a given w.
  Mat modulated_weights(const Vec& wvec, bool demodulate, Vec* d_out = nullptr) const;

  struct Trace {
    Tensor x;
    Mat win;  // (1, w_dim), the style input
    Mat cols;
    Vec s, d;
    Mat w1, w2;
    Tensor pre;
  };
  Tensor forward(const Tensor& x, const Vec& wvec, Trace* tr = nullptr) const;
  // Accumulates parameter grads, adds the style path into gw, returns gx.
  Tensor backward(const Trace& tr, Tensor gy, Vec& gw);
  void collect(nn::ParamRefs& out, const std::string& prefix, bool frozen = false);
};

struct Generator {
  GeneratorConfig cfg;
  Mapping mapping;
  Deformation deform;
  // Learned constant input, stored flat in tensor (c,y,x) order.
  Mat const_input, g_const_input;  // (c0*base_res*base_res, 1)
  std::vector<SynthBlock> blocks;
  Decoder decoder;

  void init(const GeneratorConfig& cfg_, Rng& rng);

  struct Trace {
    bool through_mapping = false;
    Vec z, zd, w;
    Mapping::Trace map_tr;
    Deformation::Trace def_tr;
    Tensor residual;
    std::vector<SynthBlock::Trace> blk_tr;
    TriPlane tp;
    RenderTrace rt;
  };

  Vec map_latent(const Vec& z) const { return mapping.forward(z); }

  // Synthesis up to the tri-plane field (no rendering).
  TriPlane make_planes(const Vec& w, const Vec& zd, Trace* tr = nullptr) const;

  RenderOutput generate(const Vec& z, const Vec& zd, const CameraPose& pose,
                        const RenderParams& rp, std::uint64_t strat_seed,
                        Trace* tr = nullptr) const;
  // Inversion path: w is given directly, mapping is skipped.
  RenderOutput generate_from_w(const Vec& w, const Vec& zd, const CameraPose& pose,
                               const RenderParams& rp, std::uint64_t strat_seed,
                               Trace* tr = nullptr) const;

  struct InputGrads {
    Vec gw, gz, gzd;
  };
  // Accumulates all parameter gradients; dimage/ddepth may be empty.
  InputGrads backward(const Trace& tr, const Tensor& dimage, const Mat& ddepth);

  void collect(nn::ParamRefs& out, const std::string& prefix,
               bool deform_frozen = false);
  // Synthesis + decoder + deformation, without mapping; pivotal tuning set.
  void collect_pivotal(nn::ParamRefs& out, const std::string& prefix);
};

}  // namespace dr3d

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "dr3d/rng.hpp"
#include "dr3d/tensor.hpp"

namespace dr3d::nn {

using dr3d::Mat;
using dr3d::Vec;

// Borrowed view of one parameter and its gradient accumulator. Names are
// stable identifiers used by the optimizer state and the checkpoint format.
struct ParamRef {
  std::string name;
  Mat* value = nullptr;
  Mat* grad = nullptr;
  bool frozen = false;
};

using ParamRefs = std::vector<ParamRef>;

inline void zero_grads(const ParamRefs& refs) {
  for (const auto& r : refs) r.grad->setZero();
}

std::uint64_t hash_params(const ParamRefs& refs);

// ---- activations ----------------------------------------------------------

inline double lrelu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double lrelu_grad(double pre, double slope) {
  return pre > 0.0 ? 1.0 : slope;
}

void lrelu_forward(Mat& x, double slope);
// gy *= phi'(pre), elementwise.
void lrelu_backward(const Mat& pre, Mat& gy, double slope);

// ---- dense ----------------------------------------------------------------

// y = x W^T + b. Batches are rows: x is (n, in), y is (n, out).
struct Dense {
  Mat W, gW;  // (out, in)
  Mat b, gb;  // (out, 1)

  void init(int in, int out, Rng& rng, double w_scale = -1.0,
            double b_init = 0.0);
  int in_dim() const { return int(W.cols()); }
  int out_dim() const { return int(W.rows()); }

  Mat forward(const Mat& x) const;
  // Accumulates gW/gb, returns gradient w.r.t. x.
  Mat backward(const Mat& x, const Mat& gy);
  void collect(ParamRefs& out, const std::string& prefix, bool frozen = false);
};

// ---- conv -----------------------------------------------------------------

// 3x3 convolution, zero padding 1, configurable stride. Weights are stored
// flattened (out_c, in_c*9); im2col + GEMM does the work.
struct Conv2d {
  int in_c = 0, out_c = 0, stride = 1;
  Mat W, gW;  // (out_c, in_c*9)
  Mat b, gb;  // (out_c, 1)

  void init(int in_c_, int out_c_, int stride_, Rng& rng);
  int out_h(int h) const { return (h + 2 - 3) / stride + 1; }

  // cols receives the im2col matrix for backward reuse.
  Tensor forward(const Tensor& x, Mat& cols) const;
  Tensor forward_with_weights(const Tensor& x, const Mat& weights, Mat& cols,
                              bool add_bias) const;
  // Accumulates gW/gb, returns gx. `cols` is the matrix saved by forward.
  Tensor backward(const Mat& cols, const Tensor& gy, int in_h, int in_w);
  // Input gradient only (transposed conv with `weights`).
  Tensor input_grad(const Mat& weights, const Tensor& gy, int in_h,
                    int in_w) const;
  // Weight gradient only, for externally supplied activations.
  static Mat weight_grad(const Mat& cols, const Tensor& gy);

  void collect(ParamRefs& out, const std::string& prefix, bool frozen = false);
};

Mat im2col(const Tensor& x, int stride);
void col2im(const Mat& cols, int stride, Tensor& gx);

Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& gy);

// ---- optimizer -------------------------------------------------------------

// Adam with decoupled per-parameter state keyed by name, so that save/load
// round-trips and late registration both work.
class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const ParamRefs& refs);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::int64_t t() const { return t_; }

  struct Slot {
    Mat m, v;
  };
  std::map<std::string, Slot>& state() { return state_; }
  const std::map<std::string, Slot>& state() const { return state_; }
  void set_t(std::int64_t t) { t_ = t; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }

 private:
  double lr_ = 1e-3, beta1_ = 0.0, beta2_ = 0.99, eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::map<std::string, Slot> state_;
};

}  // namespace dr3d::nn

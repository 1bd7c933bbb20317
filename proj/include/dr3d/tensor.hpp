// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "dr3d/common.hpp"

namespace dr3d {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Dense channel-major (c, h, w) grid of doubles. Images are Tensor{3,h,w},
// feature maps Tensor{c,h,w}. Scalar maps (depth, opacity) use Mat directly
// with (row, col) = (y, x).
struct Tensor {
  int c = 0, h = 0, w = 0;
  Vec data;

  Tensor() = default;
  Tensor(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_), data(Vec::Zero(std::size_t(c_) * h_ * w_)) {}

  int size() const { return c * h * w; }
  double& at(int ch, int y, int x) { return data[(std::size_t(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const {
    return data[(std::size_t(ch) * h + y) * w + x];
  }
  void set_zero() { data.setZero(); }

  bool same_shape(const Tensor& o) const {
    return c == o.c && h == o.h && w == o.w;
  }

  // View of one channel as an (h, w) row-major map.
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  channel(int ch) {
    return {data.data() + std::size_t(ch) * h * w, h, w};
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  channel(int ch) const {
    return {data.data() + std::size_t(ch) * h * w, h, w};
  }
};

inline Tensor flip_horizontal(const Tensor& t) {
  Tensor out(t.c, t.h, t.w);
  for (int c = 0; c < t.c; ++c)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) out.at(c, y, x) = t.at(c, y, t.w - 1 - x);
  return out;
}

inline std::uint64_t hash_bytes(const Vec& v, std::uint64_t h = 1469598103934665603ull) {
  return fnv1a(v.data(), sizeof(double) * std::size_t(v.size()), h);
}
inline std::uint64_t hash_bytes(const Mat& m, std::uint64_t h = 1469598103934665603ull) {
  return fnv1a(m.data(), sizeof(double) * std::size_t(m.size()), h);
}

}  // namespace dr3d

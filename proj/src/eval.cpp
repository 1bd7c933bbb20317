// SPDX-License-Identifier: Apache-2.0
#include "dr3d/eval.hpp"

#include <algorithm>
#include <cmath>

#include "dr3d/common.hpp"
#include "dr3d/renderer.hpp"

namespace dr3d {
namespace {

constexpr double kSlope = 0.2;

// Unbiased MMD^2 estimate on two equal-size blocks.
double mmd2_block(const Mat& a, const Mat& b) {
  const int m = int(a.rows());
  const double F = double(a.cols());
  auto ker = [F](double dot) {
    const double u = dot / F + 1.0;
    return u * u * u;
  };
  Mat aa = a * a.transpose();
  Mat bb = b * b.transpose();
  Mat ab = a * b.transpose();
  double kaa = 0, kbb = 0, kab = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i != j) {
        kaa += ker(aa(i, j));
        kbb += ker(bb(i, j));
      }
      kab += ker(ab(i, j));
    }
  const double mm = double(m) * (m - 1);
  return kaa / mm + kbb / mm - 2.0 * kab / (double(m) * m);
}

double median(std::vector<double>& v) {
  const size_t n = v.size();
  const size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace

FeatureExtractor::FeatureExtractor(int feature_dim, std::uint64_t seed) {
  if (feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  Rng rng(seed, RngStream::kEval, 0, 0);
  const int widths[4] = {3, 16, 32, 64};
  convs_.resize(3);
  for (int i = 0; i < 3; ++i) convs_[i].init(widths[i], widths[i + 1], 2, rng);
  head_.init(64, feature_dim, rng);
}

Vec FeatureExtractor::features(const Tensor& image) const {
  if (image.c != 3) throw ConfigError("feature extractor expects 3 channels");
  if (image.h < 8 || image.w < 8)
    throw ConfigError("feature extractor needs at least 8x8 input");
  Tensor x = image;
  Mat cols;
  for (const nn::Conv2d& conv : convs_) {
    x = conv.forward(x, cols);
    for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data[i] = nn::lrelu(x.data[i], kSlope);
  }
  Mat gap(1, x.c);
  const double inv = 1.0 / (double(x.h) * x.w);
  for (int ch = 0; ch < x.c; ++ch) {
    double s = 0;
    for (int y = 0; y < x.h; ++y)
      for (int xx = 0; xx < x.w; ++xx) s += x.at(ch, y, xx);
    gap(0, ch) = s * inv;
  }
  return head_.forward(gap).row(0).transpose();
}

Mat FeatureExtractor::features_batch(const std::vector<Tensor>& images) const {
  if (images.empty()) throw ConfigError("feature batch is empty");
  Mat out(images.size(), feature_dim());
  for (size_t i = 0; i < images.size(); ++i)
    out.row(Eigen::Index(i)) = features(images[i]).transpose();
  return out;
}

double fid(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw ConfigError("fid: feature dims differ");
  if (a.rows() < 2 || b.rows() < 2) throw ConfigError("fid needs >= 2 samples per side");
  const Eigen::Index d = a.cols();
  Vec mu_a = a.colwise().mean().transpose();
  Vec mu_b = b.colwise().mean().transpose();
  Mat ca = a.rowwise() - mu_a.transpose();
  Mat cb = b.rowwise() - mu_b.transpose();
  Mat Ca = ca.transpose() * ca / double(a.rows() - 1);
  Mat Cb = cb.transpose() * cb / double(b.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Mat> ea(Ca);
  if (ea.info() != Eigen::Success) throw NumericError("fid: eigensolver failed on Ca");
  Vec la = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Mat sqrt_ca = ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().transpose();

  Mat m = sqrt_ca * Cb * sqrt_ca;
  m = 0.5 * (m + m.transpose());  // symmetrize fp noise
  Eigen::SelfAdjointEigenSolver<Mat> em(m);
  if (em.info() != Eigen::Success) throw NumericError("fid: eigensolver failed on product");
  double tr_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double dist = (mu_a - mu_b).squaredNorm() + Ca.trace() + Cb.trace() - 2.0 * tr_sqrt;
  (void)d;
  return dist;
}

double kid(const Mat& a, const Mat& b, int block) {
  if (a.cols() != b.cols()) throw ConfigError("kid: feature dims differ");
  const int m = (int)std::min<Eigen::Index>({(Eigen::Index)block, a.rows(), b.rows()});
  if (m < 2) throw ConfigError("kid needs >= 2 samples per side");
  const int nb = (int)std::min(a.rows() / m, b.rows() / m);
  double acc = 0;
  for (int i = 0; i < nb; ++i)
    acc += mmd2_block(a.middleRows((Eigen::Index)i * m, m),
                      b.middleRows((Eigen::Index)i * m, m));
  return acc / nb;
}

std::pair<double, double> kid_bootstrap(const Mat& a, const Mat& b, int n_boot,
                                        std::uint64_t seed, int block) {
  if (n_boot < 2) throw ConfigError("kid_bootstrap needs >= 2 resamples");
  std::vector<double> vals(n_boot);
  for (int t = 0; t < n_boot; ++t) {
    Rng rng(seed, RngStream::kEval, (std::uint64_t)t, 1);
    Mat ra(a.rows(), a.cols()), rb(b.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      ra.row(i) = a.row((Eigen::Index)rng.index((std::uint64_t)a.rows()));
    for (Eigen::Index i = 0; i < b.rows(); ++i)
      rb.row(i) = b.row((Eigen::Index)rng.index((std::uint64_t)b.rows()));
    vals[t] = kid(ra, rb, block);
  }
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= n_boot;
  double var = 0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= (n_boot - 1);
  return {mean, std::sqrt(var)};
}

GeometryReport geometry_error(const std::vector<Mat>& pred_depth,
                              const std::vector<Mat>& gt_depth,
                              const std::vector<Eigen::Vector2d>& pred_pose,
                              const std::vector<Eigen::Vector2d>& gt_pose,
                              const DepthBlurSpec& spec) {
  if (pred_depth.size() != gt_depth.size() || pred_depth.empty())
    throw ConfigError("geometry_error: depth list sizes differ or empty");
  GeometryReport rep;
  for (size_t i = 0; i < pred_depth.size(); ++i) {
    if (pred_depth[i].rows() != gt_depth[i].rows() ||
        pred_depth[i].cols() != gt_depth[i].cols())
      throw ConfigError("geometry_error: depth shapes differ");
    Mat bp = gaussian_blur(pred_depth[i], spec.ksize, spec.sigma);
    Mat bg = gaussian_blur(gt_depth[i], spec.ksize, spec.sigma);
    Mat diff = bg - bp;
    std::vector<double> flat(diff.data(), diff.data() + diff.size());
    const double shift = median(flat);
    rep.depth_mse += (diff.array() - shift).square().mean();
  }
  rep.depth_mse /= double(pred_depth.size());
  if (!pred_pose.empty()) rep.pose_mse = pose_loss(gt_pose, pred_pose, nullptr);
  return rep;
}

}  // namespace dr3d

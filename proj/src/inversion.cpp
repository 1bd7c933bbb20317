// SPDX-License-Identifier: Apache-2.0
#include "dr3d/inversion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "dr3d/checkpoint.hpp"

namespace dr3d {

InversionSpec inversion_spec(const RunConfig& cfg) {
  InversionSpec s;
  s.invert_steps = cfg.invert_steps;
  s.pivotal_steps = cfg.pivotal_steps;
  s.invert_lr = cfg.invert_lr;
  s.pivotal_lr = cfg.pivotal_lr;
  s.mean_w_samples = cfg.mean_w_samples;
  s.seed = cfg.seed;
  s.rp = cfg.render_params();
  s.base_pose = cfg.base_pose();
  s.feature_weight = cfg.feature_weight;
  return s;
}

namespace {

void validate_spec(const InversionSpec& spec, const Tensor& image) {
  if (spec.invert_steps < 0 || spec.pivotal_steps < 0)
    throw ConfigError("inversion: step counts must be >= 0");
  if (spec.invert_lr <= 0 || spec.pivotal_lr <= 0)
    throw ConfigError("inversion: learning rates must be positive");
  if (spec.mean_w_samples < 1)
    throw ConfigError("inversion: mean_w_samples must be >= 1");
  if (spec.feature_weight < 0)
    throw ConfigError("inversion: feature_weight must be >= 0");
  if (spec.feature_weight > 0 && spec.critic == nullptr)
    throw ConfigError("inversion: feature loss enabled without a critic");
  if (image.c != 3 || image.h != spec.rp.h || image.w != spec.rp.w)
    throw ConfigError("inversion: image does not match the render resolution");
}

// Reconstruction objective and its image gradient. The optional critic term
// compares pre-head activations under the same pose conditioning.
double objective(const Tensor& render, const Tensor& target,
                 const InversionSpec& spec, const CameraPose& pose,
                 const Mat& target_feat, Tensor& dimage) {
  const double n = double(render.data.size());
  dimage = Tensor(3, render.h, render.w);
  dimage.data = (2.0 / n) * (render.data - target.data);
  double obj = (render.data - target.data).squaredNorm() / n;
  if (spec.feature_weight > 0) {
    Discriminator::Trace dtr;
    spec.critic->discriminate(render, pose, &dtr);
    const Mat fd = dtr.flat - target_feat;
    const double f = double(fd.size());
    obj += spec.feature_weight * fd.squaredNorm() / f;
    const Tensor gf = spec.critic->features_input_grad(
        dtr, (2.0 * spec.feature_weight / f) * fd);
    dimage.data += gf.data;
  }
  if (!std::isfinite(obj)) throw NumericError("inversion: non-finite objective");
  return obj;
}

void snapshot_params(const nn::ParamRefs& refs, std::vector<Mat>& out) {
  out.resize(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) out[i] = *refs[i].value;
}

void restore_params(const nn::ParamRefs& refs, const std::vector<Mat>& in) {
  for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].value = in[i];
}

}  // namespace

InversionResult invert(const Tensor& image, const Generator& g,
                       const PoseEstimator& p, const InversionSpec& spec) {
  validate_spec(spec, image);

  InversionResult res;
  res.tuned = g;
  res.rp = spec.rp;
  res.render_seed =
      derive_seed(spec.seed, std::uint64_t(RngStream::kInversion), 0, 0);

  const Eigen::Vector2d yp = p.estimate(image);
  res.pose = spec.base_pose;
  res.pose.yaw = yp[0];
  res.pose.pitch = yp[1];

  Mat target_feat;
  if (spec.feature_weight > 0) {
    Discriminator::Trace dtr;
    spec.critic->discriminate(image, res.pose, &dtr);
    target_feat = dtr.flat;
  }

  // Stage 1 init: mean style code over fresh latent draws, zero deformation.
  Vec w0 = Vec::Zero(g.cfg.w_dim);
  for (int i = 0; i < spec.mean_w_samples; ++i) {
    Rng zr(spec.seed, RngStream::kInversion, 1, std::uint64_t(i));
    Vec z(g.cfg.z_dim);
    for (int k = 0; k < g.cfg.z_dim; ++k) z[k] = zr.normal();
    w0 += g.map_latent(z);
  }
  w0 /= double(spec.mean_w_samples);

  Mat w_val(g.cfg.w_dim, 1), w_grad(g.cfg.w_dim, 1);
  Mat zd_val = Mat::Zero(g.cfg.zd_dim, 1), zd_grad(g.cfg.zd_dim, 1);
  w_val.col(0) = w0;
  nn::ParamRefs latents = {{"inv.w", &w_val, &w_grad, false},
                           {"inv.zd", &zd_val, &zd_grad, false}};
  nn::Adam opt1(spec.invert_lr, 0.9, 0.999, 1e-8);

  double best1 = std::numeric_limits<double>::infinity();
  res.w_star = w0;
  res.zd_star = zd_val.col(0);
  for (int step = 0; step <= spec.invert_steps; ++step) {
    Generator::Trace tr;
    const RenderOutput out = res.tuned.generate_from_w(
        w_val.col(0), zd_val.col(0), res.pose, spec.rp, res.render_seed, &tr);
    Tensor dimg;
    const double obj =
        objective(out.image, image, spec, res.pose, target_feat, dimg);
    if (obj < best1) {
      best1 = obj;
      res.w_star = w_val.col(0);
      res.zd_star = zd_val.col(0);
    }
    res.trace.push_back(best1);
    if (step == spec.invert_steps) break;
    const Generator::InputGrads ig = res.tuned.backward(tr, dimg, Mat());
    w_grad.col(0) = ig.gw;
    zd_grad.col(0) = ig.gzd;
    opt1.step(latents);
  }
  res.stage1_error = best1;
  res.stage1_len = int(res.trace.size());

  // Stage 2: pivotal tuning of synthesis/decoder/deformation at the fixed
  // latent optimum. Stage 1 never touched parameter values, so the first
  // evaluation here reproduces stage1_error exactly.
  nn::ParamRefs pivotal;
  res.tuned.collect_pivotal(pivotal, "g");
  nn::Adam opt2(spec.pivotal_lr, 0.9, 0.999, 1e-8);

  double best2 = std::numeric_limits<double>::infinity();
  std::vector<Mat> best_params;
  snapshot_params(pivotal, best_params);
  for (int step = 0; step <= spec.pivotal_steps; ++step) {
    Generator::Trace tr;
    const RenderOutput out = res.tuned.generate_from_w(
        res.w_star, res.zd_star, res.pose, spec.rp, res.render_seed, &tr);
    Tensor dimg;
    const double obj =
        objective(out.image, image, spec, res.pose, target_feat, dimg);
    if (obj < best2) {
      best2 = obj;
      snapshot_params(pivotal, best_params);
    }
    res.trace.push_back(best2);
    if (step == spec.pivotal_steps) break;
    nn::zero_grads(pivotal);
    res.tuned.backward(tr, dimg, Mat());
    opt2.step(pivotal);
  }
  restore_params(pivotal, best_params);
  res.stage2_error = best2;

  res.reconstruction = res.tuned
                           .generate_from_w(res.w_star, res.zd_star, res.pose,
                                            spec.rp, res.render_seed)
                           .image;
  return res;
}

RenderOutput novel_view(const InversionResult& inv, const CameraPose& pose_new) {
  return inv.tuned.generate_from_w(inv.w_star, inv.zd_star, pose_new, inv.rp,
                                   inv.render_seed);
}

void InversionResult::save(const std::string& path) const {
  Checkpoint ck;
  ck.put_bytes("meta/kind", "inversion");
  const GeneratorConfig& gc = tuned.cfg;
  ck.put_i64("gcfg/z_dim", gc.z_dim);
  ck.put_i64("gcfg/zd_dim", gc.zd_dim);
  ck.put_i64("gcfg/w_dim", gc.w_dim);
  ck.put_i64("gcfg/mapping_layers", gc.mapping_layers);
  ck.put_i64("gcfg/mapping_width", gc.mapping_width);
  ck.put_i64("gcfg/deform_width", gc.deform_width);
  ck.put_i64("gcfg/base_res", gc.base_res);
  ck.put_i64("gcfg/synth_blocks", gc.synth_blocks);
  ck.put_i64("gcfg/synth_channels", gc.synth_channels);
  ck.put_i64("gcfg/plane_res", gc.plane_res);
  ck.put_i64("gcfg/plane_channels", gc.plane_channels);
  ck.put_f64("gcfg/extent", gc.extent);
  ck.put_i64("gcfg/decoder_width", gc.decoder_width);
  ck.put_mat("w_star", w_star);
  ck.put_mat("zd_star", zd_star);
  ck.put_f64("pose/yaw", pose.yaw);
  ck.put_f64("pose/pitch", pose.pitch);
  ck.put_f64("pose/radius", pose.radius);
  ck.put_f64("pose/fov", pose.fov);
  ck.put_i64("rp/h", rp.h);
  ck.put_i64("rp/w", rp.w);
  ck.put_i64("rp/n_samples", rp.n_samples);
  ck.put_f64("rp/near", rp.near);
  ck.put_f64("rp/far", rp.far);
  ck.put_i64("render_seed", std::bit_cast<std::int64_t>(render_seed));
  ck.put_f64("stage1_error", stage1_error);
  ck.put_f64("stage2_error", stage2_error);
  ck.put_i64("stage1_len", stage1_len);
  Mat tr(Eigen::Index(trace.size()), 1);
  for (std::size_t i = 0; i < trace.size(); ++i) tr(Eigen::Index(i), 0) = trace[i];
  ck.put_mat("trace", tr);
  nn::ParamRefs refs;
  const_cast<Generator&>(tuned).collect(refs, "params");
  for (const auto& r : refs) ck.put_mat(r.name, *r.value);
  ck.save(path);
}

InversionResult InversionResult::load(const std::string& path) {
  const Checkpoint ck = Checkpoint::load(path);
  if (ck.get_bytes("meta/kind") != "inversion")
    throw IoError("inversion load: wrong artifact kind");
  GeneratorConfig gc;
  gc.z_dim = int(ck.get_i64("gcfg/z_dim"));
  gc.zd_dim = int(ck.get_i64("gcfg/zd_dim"));
  gc.w_dim = int(ck.get_i64("gcfg/w_dim"));
  gc.mapping_layers = int(ck.get_i64("gcfg/mapping_layers"));
  gc.mapping_width = int(ck.get_i64("gcfg/mapping_width"));
  gc.deform_width = int(ck.get_i64("gcfg/deform_width"));
  gc.base_res = int(ck.get_i64("gcfg/base_res"));
  gc.synth_blocks = int(ck.get_i64("gcfg/synth_blocks"));
  gc.synth_channels = int(ck.get_i64("gcfg/synth_channels"));
  gc.plane_res = int(ck.get_i64("gcfg/plane_res"));
  gc.plane_channels = int(ck.get_i64("gcfg/plane_channels"));
  gc.extent = ck.get_f64("gcfg/extent");
  gc.decoder_width = int(ck.get_i64("gcfg/decoder_width"));
  gc.validate();

  InversionResult res;
  Rng init_rng(0);
  res.tuned.init(gc, init_rng);
  nn::ParamRefs refs;
  res.tuned.collect(refs, "params");
  for (auto& r : refs) *r.value = ck.get_mat(r.name);
  res.w_star = ck.get_mat("w_star");
  res.zd_star = ck.get_mat("zd_star");
  res.pose.yaw = ck.get_f64("pose/yaw");
  res.pose.pitch = ck.get_f64("pose/pitch");
  res.pose.radius = ck.get_f64("pose/radius");
  res.pose.fov = ck.get_f64("pose/fov");
  res.rp.h = int(ck.get_i64("rp/h"));
  res.rp.w = int(ck.get_i64("rp/w"));
  res.rp.n_samples = int(ck.get_i64("rp/n_samples"));
  res.rp.near = ck.get_f64("rp/near");
  res.rp.far = ck.get_f64("rp/far");
  res.render_seed = std::bit_cast<std::uint64_t>(ck.get_i64("render_seed"));
  res.stage1_error = ck.get_f64("stage1_error");
  res.stage2_error = ck.get_f64("stage2_error");
  res.stage1_len = int(ck.get_i64("stage1_len"));
  const Mat tr = ck.get_mat("trace");
  res.trace.assign(tr.data(), tr.data() + tr.size());
  // The reconstruction is a pure function of the stored state.
  res.reconstruction = res.tuned
                           .generate_from_w(res.w_star, res.zd_star, res.pose,
                                            res.rp, res.render_seed)
                           .image;
  return res;
}

namespace {

struct LogisticFit {
  Vec beta;
  double bias = 0.0;
};

constexpr double kRidge = 1e-4;
constexpr double kGradTol = 1e-6;

// Full-batch gradient descent with a step size from the curvature bound
// L = max_i ||(x_i, 1)||^2 / 4 + 2*ridge, which makes descent monotone.
LogisticFit fit_logistic(const Mat& X, const Vec& y) {
  const Eigen::Index n = X.rows(), d = X.cols();
  double row_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    row_sq = std::max(row_sq, X.row(i).squaredNorm() + 1.0);
  const double lr = 1.0 / (0.25 * row_sq + 2.0 * kRidge);

  LogisticFit fit;
  fit.beta = Vec::Zero(d);
  for (long iter = 0; iter < 500000; ++iter) {
    Vec s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = y[i] * (X.row(i).dot(fit.beta) + fit.bias);
      s[i] = -y[i] / (1.0 + std::exp(m));
    }
    Vec gbeta = X.transpose() * s / double(n) + 2.0 * kRidge * fit.beta;
    const double gbias = s.sum() / double(n);
    if (std::sqrt(gbeta.squaredNorm() + gbias * gbias) <= kGradTol) return fit;
    fit.beta -= lr * gbeta;
    fit.bias -= lr * gbias;
  }
  throw NumericError("edit direction: logistic fit did not converge");
}

double accuracy(const LogisticFit& fit, const Mat& X, const Vec& y) {
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double z = X.row(i).dot(fit.beta) + fit.bias;
    if ((z > 0.0) == (y[i] > 0.0)) ++hits;
  }
  return double(hits) / double(X.rows());
}

}  // namespace

EditDirection find_edit_direction(const std::vector<Vec>& ws,
                                  const std::vector<int>& labels,
                                  const std::string& attribute,
                                  std::uint64_t seed) {
  if (ws.empty() || ws.size() != labels.size())
    throw ConfigError("edit direction: need matching samples and labels");
  const Eigen::Index d = ws[0].size();
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw ConfigError("edit direction: labels must be 0 or 1");
    if (ws[i].size() != d)
      throw ConfigError("edit direction: inconsistent sample dimensions");
    by_class[labels[i]].push_back(i);
  }
  if (by_class[0].size() < 10 || by_class[1].size() < 10)
    throw ConfigError("edit direction: need at least 10 samples per label");

  const auto fill = [&](const std::vector<std::size_t>& idx, Mat& X, Vec& y) {
    X.resize(Eigen::Index(idx.size()), d);
    y.resize(Eigen::Index(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      X.row(Eigen::Index(i)) = ws[idx[i]].transpose();
      y[Eigen::Index(i)] = labels[idx[i]] == 1 ? 1.0 : -1.0;
    }
  };

  std::vector<std::size_t> all(ws.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Mat X;
  Vec y;
  fill(all, X, y);
  const LogisticFit full = fit_logistic(X, y);
  const double norm = full.beta.norm();
  if (norm < 1e-12)
    throw NumericError("edit direction: degenerate weight vector");

  // Confidence: stratified 75/25 split, refit on the large part.
  Rng rng(seed, RngStream::kInversion, 2, 0);
  std::vector<std::size_t> train, held;
  for (auto& cls : by_class) {
    for (std::size_t i = cls.size(); i > 1; --i)
      std::swap(cls[i - 1], cls[std::size_t(rng.uniform() * double(i))]);
    const std::size_t n_held = std::max<std::size_t>(1, cls.size() / 4);
    held.insert(held.end(), cls.begin(), cls.begin() + std::ptrdiff_t(n_held));
    train.insert(train.end(), cls.begin() + std::ptrdiff_t(n_held), cls.end());
  }
  Mat Xt, Xh;
  Vec yt, yh;
  fill(train, Xt, yt);
  fill(held, Xh, yh);

  EditDirection dir;
  dir.direction = full.beta / norm;
  dir.attribute = attribute;
  dir.heldout_accuracy = accuracy(fit_logistic(Xt, yt), Xh, yh);
  dir.low_confidence = dir.heldout_accuracy < kLowConfidenceAccuracy;
  return dir;
}

Vec edit(const Vec& w, const EditDirection& dir, double strength) {
  return w + strength * dir.direction;
}

void EditDirection::save(const std::string& path) const {
  Checkpoint ck;
  ck.put_bytes("meta/kind", "edit_direction");
  ck.put_mat("direction", direction);
  ck.put_bytes("attribute", attribute);
  ck.put_f64("heldout_accuracy", heldout_accuracy);
  ck.put_i64("low_confidence", low_confidence ? 1 : 0);
  ck.save(path);
}

EditDirection EditDirection::load(const std::string& path) {
  const Checkpoint ck = Checkpoint::load(path);
  if (ck.get_bytes("meta/kind") != "edit_direction")
    throw IoError("edit direction load: wrong artifact kind");
  EditDirection dir;
  dir.direction = ck.get_mat("direction");
  dir.attribute = ck.get_bytes("attribute");
  dir.heldout_accuracy = ck.get_f64("heldout_accuracy");
  dir.low_confidence = ck.get_i64("low_confidence") != 0;
  return dir;
}

}  // namespace dr3d

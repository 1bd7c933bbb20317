// SPDX-License-Identifier: Apache-2.0
#include "dr3d/adaptation.hpp"

#include <bit>
#include <chrono>

#include "dr3d/common.hpp"
#include "json.hpp"

namespace dr3d {
namespace {

// RNG lane allocation, lane() packs (lane, batch index) into the final seed
// word. Pretraining uses lanes 0..7, adaptation lanes 8..15, so the two
// phases never replay each other's draws even at equal iteration numbers.
//   kData:     0 adv real index | 1 pose-batch index | 8 adv real index
//   kAugment:  0 adv flip       | 1 pose-batch flip  | 8 adv flip | 9 pseudo flip
//   kLatents:  0 z | 1 zd                            | 8 z | 9 zd | 10 pseudo z | 11 pseudo zd
//   kPoses:                                            8 pseudo pose
//   kStratify: 0 fake render                         | 8 fake render | 9 pseudo render
std::uint64_t lane(int l, int i) {
  return (std::uint64_t(l) << 32) | std::uint32_t(i);
}

Vec draw_normal_vec(int n, Rng& rng) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

void append_params(Checkpoint& ck, const nn::ParamRefs& refs) {
  for (const auto& r : refs) ck.put_mat(r.name, *r.value);
}

void restore_params(const Checkpoint& ck, const nn::ParamRefs& refs) {
  for (const auto& r : refs) {
    Mat m = ck.get_mat(r.name);
    if (m.rows() != r.value->rows() || m.cols() != r.value->cols())
      throw IoError("checkpoint shape mismatch for " + r.name);
    *r.value = m;
  }
}

void append_adam(Checkpoint& ck, const std::string& tag, const nn::Adam& opt) {
  ck.put_i64(tag + "/t", opt.t());
  for (const auto& [name, slot] : opt.state()) {
    ck.put_mat(tag + "/m/" + name, slot.m);
    ck.put_mat(tag + "/v/" + name, slot.v);
  }
}

void restore_adam(const Checkpoint& ck, const std::string& tag, nn::Adam& opt) {
  opt.set_t(ck.get_i64(tag + "/t"));
  opt.state().clear();
  const std::string mpre = tag + "/m/";
  for (const std::string& rec : ck.names_with_prefix(mpre)) {
    const std::string name = rec.substr(mpre.size());
    nn::Adam::Slot slot;
    slot.m = ck.get_mat(rec);
    slot.v = ck.get_mat(tag + "/v/" + name);
    opt.state()[name] = std::move(slot);
  }
}

}  // namespace

Dataset dataset_from_domain(const SyntheticDomain& dom) {
  Dataset d;
  d.images.reserve(dom.samples.size());
  d.poses.reserve(dom.samples.size());
  for (const auto& s : dom.samples) {
    d.images.push_back(s.image);
    d.poses.emplace_back(s.pose.yaw, s.pose.pitch);
  }
  return d;
}

std::string IterationLog::to_json() const {
  nlohmann::json j;
  j["iteration"] = iteration;
  j["phase"] = phase;
  j["loss_total"] = loss_total;
  j["loss_adv_g"] = loss_adv_g;
  j["loss_depth"] = loss_depth;
  j["loss_normal"] = loss_normal;
  j["loss_pose_g"] = loss_pose_g;
  j["loss_d"] = loss_d;
  j["r1"] = r1;
  j["loss_p"] = loss_p;
  j["wall_ms"] = wall_ms;
  return j.dump();
}

IterationLog IterationLog::from_json(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  IterationLog l;
  l.iteration = j.at("iteration").get<std::int64_t>();
  l.phase = j.at("phase").get<std::string>();
  l.loss_total = j.at("loss_total").get<double>();
  l.loss_adv_g = j.at("loss_adv_g").get<double>();
  l.loss_depth = j.at("loss_depth").get<double>();
  l.loss_normal = j.at("loss_normal").get<double>();
  l.loss_pose_g = j.at("loss_pose_g").get<double>();
  l.loss_d = j.at("loss_d").get<double>();
  l.r1 = j.at("r1").get<double>();
  l.loss_p = j.at("loss_p").get<double>();
  l.wall_ms = j.at("wall_ms").get<double>();
  return l;
}

bool IterationLog::same_losses(const IterationLog& o) const {
  return iteration == o.iteration && phase == o.phase && loss_total == o.loss_total &&
         loss_adv_g == o.loss_adv_g && loss_depth == o.loss_depth &&
         loss_normal == o.loss_normal && loss_pose_g == o.loss_pose_g &&
         loss_d == o.loss_d && r1 == o.r1 && loss_p == o.loss_p;
}

Trainer::Trainer(const RunConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rg(cfg_.seed, RngStream::kInit, 0, 0);
  g_.init(cfg_.generator_config(), rg);
  Rng rd(cfg_.seed, RngStream::kInit, 1, 0);
  DiscriminatorConfig dc = cfg_.discriminator_config();
  dc.freeze_blocks = 0;  // frozen blocks apply to adaptation only
  d_.init(dc, rd);
  Rng rp(cfg_.seed, RngStream::kInit, 2, 0);
  p_.init(cfg_.pose_estimator_config(), cfg_.pose_prior(), rp);
  opt_g_ = nn::Adam(cfg_.lr_g, 0.0, cfg_.adam_beta2, 1e-8);
  opt_d_ = nn::Adam(cfg_.lr_d, 0.0, cfg_.adam_beta2, 1e-8);
  opt_p_ = nn::Adam(cfg_.lr_p, 0.0, cfg_.adam_beta2, 1e-8);
}

nn::ParamRefs Trainer::gen_params(bool deform_frozen) {
  nn::ParamRefs refs;
  g_.collect(refs, "g", deform_frozen);
  return refs;
}

nn::ParamRefs Trainer::critic_params() {
  nn::ParamRefs refs;
  d_.collect(refs, "d");
  return refs;
}

nn::ParamRefs Trainer::pose_params() {
  nn::ParamRefs refs;
  p_.collect(refs, "p");
  return refs;
}

CameraPose Trainer::to_camera(const Eigen::Vector2d& yaw_pitch) const {
  CameraPose pose;
  pose.yaw = yaw_pitch.x();
  pose.pitch = yaw_pitch.y();
  pose.radius = cfg_.cam_radius;
  pose.fov = cfg_.cam_fov_deg * kPi / 180.0;
  return pose;
}

Trainer::RealBatch Trainer::draw_real_batch(const Dataset& data, std::int64_t it,
                                            int flip_lane, int index_lane) {
  if (data.images.empty()) throw ConfigError("dataset is empty");
  RealBatch rb;
  const int B = cfg_.batch_size;
  for (int i = 0; i < B; ++i) {
    Rng ridx(cfg_.seed, RngStream::kData, (std::uint64_t)it, lane(index_lane, i));
    const size_t idx = ridx.index(data.images.size());
    Tensor img = data.images[idx];
    Eigen::Vector2d pv = data.has_poses() ? data.poses[idx] : Eigen::Vector2d::Zero();
    Rng rflip(cfg_.seed, RngStream::kAugment, (std::uint64_t)it, lane(flip_lane, i));
    if (rflip.uniform() < 0.5) {
      img = flip_horizontal(img);
      pv.x() = -pv.x();  // mirrored head turns the other way
    }
    rb.pose_vecs.push_back(pv);
    rb.poses.push_back(to_camera(pv));
    rb.images.push_back(std::move(img));
  }
  return rb;
}

PoseBatch Trainer::build_pseudo_batch(std::int64_t it) {
  PoseBatch batch;
  const int B = cfg_.batch_size;
  const RenderParams rp = cfg_.render_params();
  const PosePrior prior = cfg_.pose_prior();
  for (int i = 0; i < B; ++i) {
    Rng rz(cfg_.seed, RngStream::kLatents, (std::uint64_t)it, lane(10, i));
    Rng rzd(cfg_.seed, RngStream::kLatents, (std::uint64_t)it, lane(11, i));
    Rng rpose(cfg_.seed, RngStream::kPoses, (std::uint64_t)it, lane(8, i));
    Vec z = draw_normal_vec(cfg_.z_dim, rz);
    Vec zd = draw_normal_vec(cfg_.zd_dim, rzd);
    CameraPose pose = sample_pose_prior(prior, rpose, cfg_.cam_radius,
                                        cfg_.cam_fov_deg * kPi / 180.0);
    const std::uint64_t strat =
        derive_seed(cfg_.seed, (std::uint64_t)RngStream::kStratify, (std::uint64_t)it, lane(9, i));
    RenderOutput out = g_.generate(z, zd, pose, rp, strat);
    Eigen::Vector2d pv(pose.yaw, pose.pitch);
    Rng rflip(cfg_.seed, RngStream::kAugment, (std::uint64_t)it, lane(9, i));
    if (rflip.uniform() < 0.5) {
      out.image = flip_horizontal(out.image);
      pv.x() = -pv.x();
    }
    batch.images.push_back(std::move(out.image));
    batch.poses.push_back(pv);
  }
  return batch;
}

IterationLog Trainer::pretrain_iteration(const Dataset& source) {
  if (phase_ != "pretrain")
    throw ConfigError("pretrain_iteration called in phase " + phase_);
  if (!source.has_poses())
    throw ConfigError("pretraining needs ground-truth poses");
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t it = iter_;
  const int B = cfg_.batch_size;
  const RenderParams rp = cfg_.render_params();
  IterationLog log;
  log.iteration = it;
  log.phase = phase_;

  // Supervised pose-net step on a posed, flip-augmented batch.
  {
    RealBatch pb = draw_real_batch(source, it, 1, 1);
    PoseBatch batch;
    batch.images = std::move(pb.images);
    batch.poses = std::move(pb.pose_vecs);
    log.loss_p = train_pose_step(p_, batch, opt_p_);
  }

  RealBatch rb = draw_real_batch(source, it, 0, 0);

  // Fakes rendered at the real batch's poses; the critic is pose-conditional,
  // which is what couples image appearance to camera geometry.
  std::vector<Generator::Trace> traces(B);
  std::vector<RenderOutput> fakes(B);
  for (int i = 0; i < B; ++i) {
    Rng rz(cfg_.seed, RngStream::kLatents, (std::uint64_t)it, lane(0, i));
    Rng rzd(cfg_.seed, RngStream::kLatents, (std::uint64_t)it, lane(1, i));
    Vec z = draw_normal_vec(cfg_.z_dim, rz);
    Vec zd = draw_normal_vec(cfg_.zd_dim, rzd);
    const std::uint64_t strat =
        derive_seed(cfg_.seed, (std::uint64_t)RngStream::kStratify, (std::uint64_t)it, lane(0, i));
    fakes[i] = g_.generate(z, zd, rb.poses[i], rp, strat, &traces[i]);
  }

  // Critic step.
  nn::ParamRefs drefs = critic_params();
  nn::zero_grads(drefs);
  const bool do_r1 = cfg_.r1_weight > 0 && (it % cfg_.r1_interval == 0);
  for (int i = 0; i < B; ++i) {
    Discriminator::Trace trf, trr;
    const double lf = d_.discriminate(fakes[i].image, rb.poses[i], &trf);
    const double lr = d_.discriminate(rb.images[i], rb.poses[i], &trr);
    log.loss_d += adv_loss_d(lr, lf) / B;
    d_.backward(trf, adv_loss_d_grad_fake(lf) / B);
    d_.backward(trr, adv_loss_d_grad_real(lr) / B);
    if (do_r1) log.r1 += d_.r1_penalty(trr, cfg_.r1_weight / B) / B;
  }
  opt_d_.step(drefs);

  // Generator step, adversarial only; the deformation branch stays frozen so
  // the photo-domain model is exactly deformation-free.
  nn::ParamRefs grefs = gen_params(/*deform_frozen=*/true);
  nn::zero_grads(grefs);
  for (int i = 0; i < B; ++i) {
    Discriminator::Trace trf;
    const double lf = d_.discriminate(fakes[i].image, rb.poses[i], &trf);
    log.loss_adv_g += adv_loss_g(lf) / B;
    Tensor dimg = d_.backward(trf, adv_loss_g_grad(lf) / B);
    g_.backward(traces[i], dimg, Mat());
  }
  opt_g_.step(grefs);

  log.loss_total = log.loss_adv_g;
  ++iter_;
  log.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return log;
}

void Trainer::begin_adaptation() {
  if (phase_ == "adapt") throw ConfigError("adaptation already begun");
  g_photo_ = g_;
  has_photo_ = true;
  phase_ = "adapt";
  iter_ = 0;
  d_.cfg.freeze_blocks = cfg_.freeze_blocks;
  // Fresh optimizer states; adaptation is a new optimization problem.
  opt_g_ = nn::Adam(cfg_.lr_g, 0.0, cfg_.adam_beta2, 1e-8);
  opt_d_ = nn::Adam(cfg_.lr_d, 0.0, cfg_.adam_beta2, 1e-8);
  opt_p_ = nn::Adam(cfg_.lr_p, 0.0, cfg_.adam_beta2, 1e-8);
}

IterationLog Trainer::adapt_iteration(const Dataset& target) {
  if (phase_ != "adapt")
    throw ConfigError("adapt_iteration before begin_adaptation");
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t it = iter_;
  const int B = cfg_.batch_size;
  const RenderParams rp = cfg_.render_params();
  const DepthBlurSpec spec{cfg_.blur_ksize, cfg_.blur_sigma};
  IterationLog log;
  log.iteration = it;
  log.phase = phase_;

  // 1) Pose-net step on pseudo-labeled renders from the current generator.
  PoseBatch pseudo = build_pseudo_batch(it);
  log.loss_p = train_pose_step(p_, pseudo, opt_p_);

  // 2) Unposed drawing batch; poses come from the freshly updated pose net.
  RealBatch rb = draw_real_batch(target, it, 8, 8);
  for (int i = 0; i < B; ++i) {
    rb.pose_vecs[i] = p_.estimate(rb.images[i]);
    rb.poses[i] = to_camera(rb.pose_vecs[i]);
  }

  // 3) Fakes at the estimated poses, plus photo-snapshot renders of the same
  // latents with the same stratification seeds. Identical seeds make the
  // depth prior exactly zero while the two generators still agree.
  std::vector<Generator::Trace> traces(B);
  std::vector<RenderOutput> fakes(B);
  std::vector<Mat> photo_depth(B);
  for (int i = 0; i < B; ++i) {
    Rng rz(cfg_.seed, RngStream::kLatents, (std::uint64_t)it, lane(8, i));
    Rng rzd(cfg_.seed, RngStream::kLatents, (std::uint64_t)it, lane(9, i));
    Vec z = draw_normal_vec(cfg_.z_dim, rz);
    Vec zd = draw_normal_vec(cfg_.zd_dim, rzd);
    const std::uint64_t strat =
        derive_seed(cfg_.seed, (std::uint64_t)RngStream::kStratify, (std::uint64_t)it, lane(8, i));
    fakes[i] = g_.generate(z, zd, rb.poses[i], rp, strat, &traces[i]);
    photo_depth[i] = g_photo_.generate(z, zd, rb.poses[i], rp, strat).depth;
  }

  // 4) Critic step (frozen early blocks skipped by the optimizer).
  nn::ParamRefs drefs = critic_params();
  nn::zero_grads(drefs);
  const bool do_r1 = cfg_.r1_weight > 0 && (it % cfg_.r1_interval == 0);
  for (int i = 0; i < B; ++i) {
    Discriminator::Trace trf, trr;
    const double lf = d_.discriminate(fakes[i].image, rb.poses[i], &trf);
    const double lr = d_.discriminate(rb.images[i], rb.poses[i], &trr);
    log.loss_d += adv_loss_d(lr, lf) / B;
    d_.backward(trf, adv_loss_d_grad_fake(lf) / B);
    d_.backward(trr, adv_loss_d_grad_real(lr) / B);
    if (do_r1) log.r1 += d_.r1_penalty(trr, cfg_.r1_weight / B) / B;
  }
  opt_d_.step(drefs);

  // 5) Generator step: adversarial + geometric priors.
  nn::ParamRefs grefs = gen_params(/*deform_frozen=*/false);
  nn::zero_grads(grefs);
  for (int i = 0; i < B; ++i) {
    Discriminator::Trace trf;
    const double lf = d_.discriminate(fakes[i].image, rb.poses[i], &trf);
    log.loss_adv_g += adv_loss_g(lf) / B;
    Tensor dimg = d_.backward(trf, adv_loss_g_grad(lf) / B);

    // Pose consistency: the raw pose-net reading of the fake should match
    // the pose it was rendered at. Gradient flows into the image only.
    PoseEstimator::Trace trp;
    const Eigen::Vector2d raw = p_.forward(fakes[i].image, &trp);
    const Eigen::Vector2d diff = raw - rb.pose_vecs[i];
    log.loss_pose_g += diff.squaredNorm() / B;
    if (cfg_.gamma > 0) {
      Tensor gp = p_.backward(trp, (2.0 * cfg_.gamma / B) * diff, fakes[i].image);
      dimg.data += gp.data;
    }

    // Depth prior against the photo snapshot, and smooth surface normals.
    Mat gdepth_d;
    const double ld = depth_similarity(fakes[i].depth, photo_depth[i], spec, &gdepth_d);
    log.loss_depth += ld / B;
    NormalsResult nr = normals_from_depth(fakes[i].depth, rb.poses[i]);
    Tensor gn;
    const double ln = normal_smoothness(nr.n, &gn);
    log.loss_normal += ln / B;
    Mat ddepth = Mat::Zero(rp.h, rp.w);
    if (cfg_.alpha > 0) ddepth += (cfg_.alpha / B) * gdepth_d;
    if (cfg_.beta > 0)
      ddepth += (cfg_.beta / B) * normals_from_depth_backward(fakes[i].depth, rb.poses[i], gn);

    g_.backward(traces[i], dimg, ddepth);
  }
  opt_g_.step(grefs);

  log.loss_total = log.loss_adv_g + cfg_.alpha * log.loss_depth +
                   cfg_.beta * log.loss_normal + cfg_.gamma * log.loss_pose_g;
  ++iter_;
  log.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return log;
}

void Trainer::save_checkpoint(const std::string& path) {
  Checkpoint ck;
  ck.put_bytes("meta/phase", phase_);
  ck.put_i64("meta/iteration", iter_);
  ck.put_i64("meta/seed", std::bit_cast<std::int64_t>(cfg_.seed));
  ck.put_bytes("meta/config", cfg_.to_toml());
  append_params(ck, gen_params(false));
  append_params(ck, critic_params());
  append_params(ck, pose_params());
  if (has_photo_) {
    nn::ParamRefs refs;
    g_photo_.collect(refs, "gphoto");
    append_params(ck, refs);
  }
  append_adam(ck, "adam_g", opt_g_);
  append_adam(ck, "adam_d", opt_d_);
  append_adam(ck, "adam_p", opt_p_);
  ck.save(path);
}

Trainer Trainer::load_checkpoint(const std::string& path, const RunConfig* cfg_override) {
  Checkpoint ck = Checkpoint::load(path);
  RunConfig cfg = RunConfig::from_toml(ck.get_bytes("meta/config"));
  cfg.seed = std::bit_cast<std::uint64_t>(ck.get_i64("meta/seed"));
  if (cfg_override) {
    require_same_architecture(cfg, *cfg_override);
    cfg = *cfg_override;
  }
  Trainer t(cfg);
  t.phase_ = ck.get_bytes("meta/phase");
  if (t.phase_ != "pretrain" && t.phase_ != "adapt")
    throw IoError("checkpoint has unknown phase: " + t.phase_);
  t.iter_ = ck.get_i64("meta/iteration");
  restore_params(ck, t.gen_params(false));
  restore_params(ck, t.critic_params());
  restore_params(ck, t.pose_params());
  if (t.phase_ == "adapt") {
    t.has_photo_ = true;
    t.d_.cfg.freeze_blocks = cfg.freeze_blocks;
    t.g_photo_ = t.g_;  // right shapes, then overwrite values
    nn::ParamRefs refs;
    t.g_photo_.collect(refs, "gphoto");
    restore_params(ck, refs);
  }
  restore_adam(ck, "adam_g", t.opt_g_);
  restore_adam(ck, "adam_d", t.opt_d_);
  restore_adam(ck, "adam_p", t.opt_p_);
  return t;
}

}  // namespace dr3d

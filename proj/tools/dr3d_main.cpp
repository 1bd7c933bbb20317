// SPDX-License-Identifier: Apache-2.0
// Command-line front end: pretrain, adapt, render, invert, edit, eval.
// Exit codes: 0 success, 2 config/usage error, 3 I/O error, 4 numerical error.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dr3d/adaptation.hpp"
#include "dr3d/dataset.hpp"
#include "dr3d/eval.hpp"
#include "dr3d/image_io.hpp"
#include "dr3d/inversion.hpp"
#include "json.hpp"

namespace {

using namespace dr3d;
using nlohmann::json;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("create_directories " + dir + ": " + ec.message());
}

Vec draw_normal(int n, Rng& rng) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

std::string indexed_name(const char* stem, int i, const char* suffix) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s_%02d%s", stem, i, suffix);
  return buf;
}

// Near maps to white, far to black; background (depth == far) is black.
Tensor depth_viz(const Mat& depth, double near, double far) {
  Tensor t(3, int(depth.rows()), int(depth.cols()));
  for (int y = 0; y < depth.rows(); ++y)
    for (int x = 0; x < depth.cols(); ++x) {
      const double v = clamp((far - depth(y, x)) / (far - near), 0.0, 1.0);
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = v;
    }
  return t;
}

Tensor normal_viz(const Tensor& n) {
  Tensor t = n;
  t.data = (0.5 * (n.data.array() + 1.0)).matrix();
  return t;
}

// Shared flags. Each command marks the ones it requires.
struct CommonOpts {
  std::string config, out, checkpoint, dataset;
  std::uint64_t seed = 0;
  int resolution = 0;
  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* res_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  o.config_opt = cmd->add_option("--config", o.config, "TOML config file");
  o.seed_opt = cmd->add_option("--seed", o.seed, "override the run seed");
  o.res_opt = cmd->add_option("--resolution", o.resolution, "override the image resolution");
}

// Flag > config file > base (checkpoint snapshot or built-in defaults).
RunConfig build_config(const CommonOpts& o, const RunConfig* base) {
  RunConfig cfg = base ? *base : RunConfig{};
  if (o.config_opt->count()) cfg = RunConfig::load(o.config);
  if (o.seed_opt->count()) cfg.seed = o.seed;
  if (o.res_opt->count()) cfg.resolution = o.resolution;
  return cfg;
}

RunConfig checkpoint_config(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  RunConfig cfg = RunConfig::from_toml(ck.get_bytes("meta/config"));
  cfg.seed = std::bit_cast<std::uint64_t>(ck.get_i64("meta/seed"));
  return cfg;
}

void run_loop(Trainer& t, const Dataset& ds, bool adapt, std::int64_t total,
              const std::string& out) {
  std::ofstream log(out + "/metrics.jsonl", std::ios::app);
  if (!log) throw IoError("cannot open " + out + "/metrics.jsonl");
  const RunConfig& cfg = t.config();
  int since_flush = 0;
  while (t.iteration() < total) {
    const IterationLog l = adapt ? t.adapt_iteration(ds) : t.pretrain_iteration(ds);
    log << l.to_json() << '\n';
    if (!log) throw IoError("write failed: " + out + "/metrics.jsonl");
    if (++since_flush >= cfg.log_flush_interval) {
      log.flush();
      since_flush = 0;
      std::cout << "[" << l.phase << "] iteration " << l.iteration << "/" << total
                << " loss " << l.loss_total << "\n";
    }
    if (cfg.checkpoint_interval > 0 && t.iteration() < total &&
        t.iteration() % cfg.checkpoint_interval == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "/checkpoint_%06lld.ckpt",
                    static_cast<long long>(t.iteration()));
      t.save_checkpoint(out + name);
    }
  }
  log.flush();
}

int cmd_pretrain(const CommonOpts& o, int iterations_flag) {
  RunConfig cfg = build_config(o, nullptr);
  if (iterations_flag >= 0) cfg.pretrain_iterations = iterations_flag;
  cfg.validate();
  ensure_dir(o.out);
  const LoadedDataset src = synthetic_dataset("source", cfg);
  std::cout << "source domain: " << src.data.images.size() << " samples\n";
  Trainer t(cfg);
  run_loop(t, src.data, false, cfg.pretrain_iterations, o.out);
  t.save_checkpoint(o.out + "/pretrain.ckpt");
  std::cout << "wrote " << o.out << "/pretrain.ckpt\n";
  return 0;
}

int cmd_adapt(const CommonOpts& o, int iterations_flag, bool synthetic_target) {
  if (o.dataset.empty() == !synthetic_target)
    throw ConfigError("adapt needs exactly one of --dataset or --synthetic-target");
  const RunConfig snap = checkpoint_config(o.checkpoint);
  RunConfig cfg = build_config(o, &snap);
  if (iterations_flag >= 0) cfg.adapt_iterations = iterations_flag;
  cfg.validate();
  Trainer t = Trainer::load_checkpoint(o.checkpoint, &cfg);
  const Dataset target = o.dataset.empty() ? synthetic_dataset("target", cfg).data
                                           : load_dataset(o.dataset).data;
  std::cout << "target domain: " << target.images.size() << " samples\n";
  ensure_dir(o.out);
  if (t.phase() == "pretrain") t.begin_adaptation();
  run_loop(t, target, true, cfg.adapt_iterations, o.out);
  t.save_checkpoint(o.out + "/adapt.ckpt");
  std::cout << "wrote " << o.out << "/adapt.ckpt\n";
  return 0;
}

int cmd_render(const CommonOpts& o, std::uint64_t z_seed, bool z_seed_set,
               const std::string& latent_path, std::uint64_t zd_seed,
               bool zd_seed_set, const std::vector<double>& yaws, double pitch) {
  Trainer t = Trainer::load_checkpoint(o.checkpoint);
  const RunConfig& cfg = t.config();
  const Generator& g = t.generator();

  Vec z;
  if (!latent_path.empty()) {
    const Mat m = read_npy_mat(latent_path);
    if (m.rows() != cfg.z_dim || m.cols() != 1)
      throw ConfigError("latent file must be a (" + std::to_string(cfg.z_dim) +
                        ", 1) array, got (" + std::to_string(m.rows()) + ", " +
                        std::to_string(m.cols()) + ")");
    z = m.col(0);
  } else {
    Rng zr(z_seed_set ? z_seed : cfg.seed, RngStream::kLatents, 0, 0);
    z = draw_normal(cfg.z_dim, zr);
  }
  Vec zd = Vec::Zero(cfg.zd_dim);
  if (zd_seed_set) {
    Rng r(zd_seed, RngStream::kLatents, 1, 0);
    zd = draw_normal(cfg.zd_dim, r);
  }
  const Vec w = g.map_latent(z);

  ensure_dir(o.out);
  json views = json::array();
  for (int i = 0; i < int(yaws.size()); ++i) {
    CameraPose pose = cfg.base_pose();
    pose.yaw = yaws[std::size_t(i)];
    pose.pitch = pitch;
    const std::uint64_t strat = derive_seed(
        cfg.seed, std::uint64_t(RngStream::kStratify),
        (std::uint64_t(12) << 32) | std::uint64_t(i), 0);
    const RenderOutput ro = g.generate_from_w(w, zd, pose, cfg.render_params(), strat);
    const std::string img = indexed_name("view", i, "_image.png");
    const std::string dnpy = indexed_name("view", i, "_depth.npy");
    const std::string dpng = indexed_name("view", i, "_depth.png");
    const std::string npng = indexed_name("view", i, "_normal.png");
    write_png(o.out + "/" + img, ro.image);
    write_npy(o.out + "/" + dnpy, ro.depth);
    write_png(o.out + "/" + dpng, depth_viz(ro.depth, cfg.cam_near, cfg.cam_far));
    write_png(o.out + "/" + npng, normal_viz(normals_from_depth(ro.depth, pose).n));
    views.push_back({{"yaw", pose.yaw},
                     {"pitch", pose.pitch},
                     {"image", img},
                     {"depth_npy", dnpy},
                     {"depth_png", dpng},
                     {"normal", npng},
                     {"mean_opacity", ro.opacity.mean()}});
  }
  json manifest = {{"checkpoint", o.checkpoint},
                   {"resolution", cfg.resolution},
                   {"n_samples", cfg.n_samples},
                   {"views", views}};
  if (!latent_path.empty())
    manifest["latent"] = latent_path;
  else
    manifest["z_seed"] = z_seed_set ? z_seed : cfg.seed;
  if (zd_seed_set) manifest["zd_seed"] = zd_seed;
  atomic_write_file(o.out + "/manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << yaws.size() << " views to " << o.out << "\n";
  return 0;
}

int cmd_invert(const CommonOpts& o, const std::string& image_path, int steps,
               int pivotal_steps, double feature_weight,
               const std::vector<double>& yaws) {
  Trainer t = Trainer::load_checkpoint(o.checkpoint);
  RunConfig cfg = t.config();
  if (o.seed_opt->count()) cfg.seed = o.seed;
  if (steps >= 0) cfg.invert_steps = steps;
  if (pivotal_steps >= 0) cfg.pivotal_steps = pivotal_steps;
  if (feature_weight >= 0) cfg.feature_weight = feature_weight;
  cfg.validate();

  InversionSpec spec = inversion_spec(cfg);
  if (spec.feature_weight > 0) spec.critic = &t.critic();
  const Tensor image = read_png(image_path);
  const InversionResult inv = invert(image, t.generator(), t.pose_net(), spec);

  ensure_dir(o.out);
  inv.save(o.out + "/inversion.ckpt");
  write_png(o.out + "/reconstruction.png", inv.reconstruction);
  json novels = json::array();
  for (int i = 0; i < int(yaws.size()); ++i) {
    CameraPose pose = inv.pose;
    pose.yaw = yaws[std::size_t(i)];
    const std::string name = indexed_name("novel", i, ".png");
    write_png(o.out + "/" + name, novel_view(inv, pose).image);
    novels.push_back({{"yaw", pose.yaw}, {"pitch", pose.pitch}, {"image", name}});
  }
  const json manifest = {{"checkpoint", o.checkpoint},
                         {"image", image_path},
                         {"pose", {{"yaw", inv.pose.yaw}, {"pitch", inv.pose.pitch}}},
                         {"stage1_error", inv.stage1_error},
                         {"stage2_error", inv.stage2_error},
                         {"invert_steps", cfg.invert_steps},
                         {"pivotal_steps", cfg.pivotal_steps},
                         {"reconstruction", "reconstruction.png"},
                         {"artifact", "inversion.ckpt"},
                         {"novel_views", novels}};
  atomic_write_file(o.out + "/manifest.json", manifest.dump(2) + "\n");
  std::cout << "stage-1 error " << inv.stage1_error << ", stage-2 error "
            << inv.stage2_error << "\n";
  return 0;
}

int cmd_edit(const CommonOpts& o, const std::string& inversion_path,
             const std::string& direction_path, const std::string& labels_path,
             const std::vector<double>& strengths) {
  if (direction_path.empty() == labels_path.empty())
    throw ConfigError("edit needs exactly one of --direction or --labels");
  const InversionResult inv = InversionResult::load(inversion_path);
  ensure_dir(o.out);

  EditDirection dir;
  if (!direction_path.empty()) {
    dir = EditDirection::load(direction_path);
  } else {
    json j;
    try {
      j = json::parse(read_file(labels_path));
    } catch (const json::exception& e) {
      throw ConfigError(labels_path + ": " + std::string(e.what()));
    }
    if (!j.contains("ws") || !j.contains("labels"))
      throw ConfigError(labels_path + ": needs \"ws\" and \"labels\" arrays");
    std::vector<Vec> ws;
    for (const auto& row : j["ws"]) {
      Vec v(int(row.size()));
      for (int k = 0; k < v.size(); ++k) v[k] = row[std::size_t(k)].get<double>();
      ws.push_back(v);
    }
    const std::vector<int> labels = j["labels"].get<std::vector<int>>();
    dir = find_edit_direction(ws, labels, j.value("attribute", "attribute"),
                              o.seed_opt->count() ? o.seed : 1);
    dir.save(o.out + "/direction.ckpt");
  }
  if (dir.low_confidence)
    std::cerr << "warning: direction \"" << dir.attribute
              << "\" held-out accuracy " << dir.heldout_accuracy
              << " is below the confidence threshold\n";

  // Optional checkpoint substitutes its generator for the tuned one.
  std::optional<Trainer> holder;
  const Generator* g = &inv.tuned;
  if (!o.checkpoint.empty()) {
    holder.emplace(Trainer::load_checkpoint(o.checkpoint));
    g = &holder->generator();
  }

  json edits = json::array();
  for (int i = 0; i < int(strengths.size()); ++i) {
    const double s = strengths[std::size_t(i)];
    const Vec we = edit(inv.w_star, dir, s);
    const RenderOutput ro = g->generate_from_w(we, inv.zd_star, inv.pose, inv.rp,
                                               inv.render_seed);
    const std::string name = indexed_name("edit", i, ".png");
    write_png(o.out + "/" + name, ro.image);
    edits.push_back({{"strength", s}, {"image", name}});
  }
  const json manifest = {{"inversion", inversion_path},
                         {"attribute", dir.attribute},
                         {"heldout_accuracy", dir.heldout_accuracy},
                         {"low_confidence", dir.low_confidence},
                         {"edits", edits}};
  atomic_write_file(o.out + "/manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << strengths.size() << " edits to " << o.out << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& dataset_b,
             const std::string& synthetic_kind, int samples_flag) {
  Trainer t = Trainer::load_checkpoint(o.checkpoint);
  RunConfig cfg = t.config();
  if (o.seed_opt->count()) cfg.seed = o.seed;
  if (samples_flag > 0) cfg.eval_samples = samples_flag;
  cfg.validate();
  if (o.dataset.empty() == synthetic_kind.empty())
    throw ConfigError(
        "eval needs exactly one of --dataset, --synthetic-source, --synthetic-target");
  const LoadedDataset data = o.dataset.empty() ? synthetic_dataset(synthetic_kind, cfg)
                                               : load_dataset(o.dataset);
  const FeatureExtractor fx(cfg.eval_feature_dim, cfg.eval_extractor_seed);
  const Mat data_feats = fx.features_batch(data.data.images);

  json report = {{"checkpoint", o.checkpoint},
                 {"n_data", data.data.images.size()},
                 {"feature_dim", cfg.eval_feature_dim}};

  if (!dataset_b.empty()) {
    // Dataset-vs-dataset mode: measures a domain gap, no generator involved.
    const LoadedDataset b = load_dataset(dataset_b);
    const Mat b_feats = fx.features_batch(b.data.images);
    report["mode"] = "data-vs-data";
    report["n_b"] = b.data.images.size();
    report["fid"] = fid(data_feats, b_feats);
    report["kid"] = kid(data_feats, b_feats);
  } else {
    const Generator& g = t.generator();
    const RenderParams rp = cfg.render_params();
    const PosePrior prior = cfg.pose_prior();
    const int n = cfg.eval_samples;
    std::vector<Tensor> fakes;
    std::vector<Vec> zs;
    fakes.reserve(std::size_t(n));
    for (int i = 0; i < n; ++i) {
      Rng rz(cfg.seed, RngStream::kEval, 0, std::uint64_t(i));
      Rng rzd(cfg.seed, RngStream::kEval, 1, std::uint64_t(i));
      Rng rpose(cfg.seed, RngStream::kEval, 2, std::uint64_t(i));
      const Vec z = draw_normal(cfg.z_dim, rz);
      const Vec zd = draw_normal(cfg.zd_dim, rzd);
      const CameraPose pose =
          sample_pose_prior(prior, rpose, cfg.cam_radius, cfg.cam_fov_deg * kPi / 180.0);
      const std::uint64_t strat =
          derive_seed(cfg.seed, std::uint64_t(RngStream::kEval), 3, std::uint64_t(i));
      fakes.push_back(g.generate(z, zd, pose, rp, strat).image);
      zs.push_back(z);
    }
    const Mat gen_feats = fx.features_batch(fakes);
    report["mode"] = "generator-vs-data";
    report["n_generated"] = n;
    report["fid"] = fid(gen_feats, data_feats);
    report["kid"] = kid(gen_feats, data_feats);
    const auto [kid_mean, kid_se] = kid_bootstrap(
        gen_feats, data_feats, 64,
        derive_seed(cfg.seed, std::uint64_t(RngStream::kEval), 4, 0));
    report["kid_bootstrap_mean"] = kid_mean;
    report["kid_bootstrap_se"] = kid_se;

    if (data.data.has_poses()) {
      const int m = std::min<int>(n, int(data.data.images.size()));
      std::vector<Eigen::Vector2d> gt(data.data.poses.begin(),
                                      data.data.poses.begin() + m);
      std::vector<Eigen::Vector2d> pred;
      pred.reserve(std::size_t(m));
      for (int i = 0; i < m; ++i)
        pred.push_back(t.pose_net().estimate(data.data.images[std::size_t(i)]));
      if (data.has_depths()) {
        // Depth proxy: render eval sample i at ground-truth pose i; blurred,
        // median-aligned MSE then measures the geometry family, not identity.
        std::vector<Mat> pred_depth, gt_depth;
        for (int i = 0; i < m; ++i) {
          CameraPose pose = cfg.base_pose();
          pose.yaw = gt[std::size_t(i)].x();
          pose.pitch = gt[std::size_t(i)].y();
          Rng rzd(cfg.seed, RngStream::kEval, 1, std::uint64_t(i));
          const std::uint64_t strat = derive_seed(
              cfg.seed, std::uint64_t(RngStream::kEval), 5, std::uint64_t(i));
          pred_depth.push_back(
              g.generate(zs[std::size_t(i)], draw_normal(cfg.zd_dim, rzd), pose, rp, strat)
                  .depth);
          gt_depth.push_back(data.depths[std::size_t(i)]);
        }
        const GeometryReport gr = geometry_error(
            pred_depth, gt_depth, pred, gt, DepthBlurSpec{cfg.blur_ksize, cfg.blur_sigma});
        report["pose_mse"] = gr.pose_mse;
        report["depth_mse"] = gr.depth_mse;
      } else {
        report["pose_mse"] = pose_loss(gt, pred);
      }
    }
  }
  ensure_dir(o.out);
  atomic_write_file(o.out + "/eval.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"photo-to-drawing adaptation of a 3D-aware generator"};
  app.require_subcommand(1);
  int rc = 0;

  CommonOpts pre_o;
  int pre_iters = -1;
  CLI::App* pre = app.add_subcommand("pretrain", "train G/D/P on the synthetic source domain");
  add_common(pre, pre_o);
  pre->add_option("--out", pre_o.out, "output directory")->required();
  pre->add_option("--iterations", pre_iters, "override pretrain iteration count");
  pre->callback([&] { rc = cmd_pretrain(pre_o, pre_iters); });

  CommonOpts ad_o;
  int ad_iters = -1;
  bool ad_synth = false;
  CLI::App* ad = app.add_subcommand("adapt", "adapt a pretrained model to a drawing domain");
  add_common(ad, ad_o);
  ad->add_option("--checkpoint", ad_o.checkpoint, "source checkpoint")->required();
  ad->add_option("--out", ad_o.out, "output directory")->required();
  ad->add_option("--dataset", ad_o.dataset, "target dataset directory");
  ad->add_flag("--synthetic-target", ad_synth, "use the built-in drawing domain");
  ad->add_option("--iterations", ad_iters, "override adapt iteration count");
  ad->callback([&] { rc = cmd_adapt(ad_o, ad_iters, ad_synth); });

  CommonOpts rn_o;
  std::uint64_t rn_zseed = 0, rn_zdseed = 0;
  std::string rn_latent;
  std::vector<double> rn_yaws{-0.5, 0.0, 0.5};
  double rn_pitch = 0.0;
  CLI::App* rn = app.add_subcommand("render", "render a yaw sweep from a checkpoint");
  add_common(rn, rn_o);
  rn->add_option("--checkpoint", rn_o.checkpoint, "trainer checkpoint")->required();
  rn->add_option("--out", rn_o.out, "output directory")->required();
  CLI::Option* rn_zopt = rn->add_option("--z-seed", rn_zseed, "seed for the latent draw");
  CLI::Option* rn_lopt = rn->add_option("--latent", rn_latent, "NPY latent file instead of a seed");
  rn_zopt->excludes(rn_lopt);
  CLI::Option* rn_zdopt = rn->add_option("--zd-seed", rn_zdseed,
                                         "seed for the deformation draw (default: zero code)");
  rn->add_option("--yaws", rn_yaws, "comma-separated yaw sweep")->delimiter(',');
  rn->add_option("--pitch", rn_pitch, "pitch for every view");
  rn->callback([&] {
    rc = cmd_render(rn_o, rn_zseed, rn_zopt->count() > 0, rn_latent, rn_zdseed,
                    rn_zdopt->count() > 0, rn_yaws, rn_pitch);
  });

  CommonOpts in_o;
  std::string in_image;
  int in_steps = -1, in_pivotal = -1;
  double in_fw = -1.0;
  std::vector<double> in_yaws{-0.5, 0.0, 0.5};
  CLI::App* in = app.add_subcommand("invert", "invert an image and emit novel views");
  add_common(in, in_o);
  in->add_option("--checkpoint", in_o.checkpoint, "trainer checkpoint")->required();
  in->add_option("--image", in_image, "PNG to invert")->required();
  in->add_option("--out", in_o.out, "output directory")->required();
  in->add_option("--steps", in_steps, "override latent-stage step count");
  in->add_option("--pivotal-steps", in_pivotal, "override pivotal-stage step count");
  in->add_option("--feature-weight", in_fw, "critic-feature term weight");
  in->add_option("--yaws", in_yaws, "novel-view yaw sweep")->delimiter(',');
  in->callback([&] { rc = cmd_invert(in_o, in_image, in_steps, in_pivotal, in_fw, in_yaws); });

  CommonOpts ed_o;
  std::string ed_inv, ed_dir, ed_labels;
  std::vector<double> ed_strengths{-2.0, -1.0, 0.0, 1.0, 2.0};
  CLI::App* ed = app.add_subcommand("edit", "apply a latent edit direction at several strengths");
  add_common(ed, ed_o);
  ed->add_option("--inversion", ed_inv, "inversion artifact")->required();
  ed->add_option("--out", ed_o.out, "output directory")->required();
  ed->add_option("--direction", ed_dir, "edit-direction artifact");
  ed->add_option("--labels", ed_labels, "JSON with ws + labels to fit a direction");
  ed->add_option("--checkpoint", ed_o.checkpoint,
                 "render with this trainer checkpoint's generator instead of the tuned one");
  ed->add_option("--strengths", ed_strengths, "comma-separated strengths")->delimiter(',');
  ed->callback([&] { rc = cmd_edit(ed_o, ed_inv, ed_dir, ed_labels, ed_strengths); });

  CommonOpts ev_o;
  std::string ev_b, ev_synth;
  int ev_samples = -1;
  CLI::App* ev = app.add_subcommand("eval", "distribution metrics and geometry errors");
  add_common(ev, ev_o);
  ev->add_option("--checkpoint", ev_o.checkpoint, "trainer checkpoint")->required();
  ev->add_option("--out", ev_o.out, "output directory")->required();
  ev->add_option("--dataset", ev_o.dataset, "reference dataset directory");
  ev->add_option("--dataset-b", ev_b, "compare --dataset against this dataset instead of the generator");
  ev->add_flag_callback("--synthetic-source", [&] { ev_synth = "source"; },
                        "reference = built-in photo domain");
  ev->add_flag_callback("--synthetic-target", [&] { ev_synth = "target"; },
                        "reference = built-in drawing domain");
  ev->add_option("--samples", ev_samples, "override generated sample count");
  ev->callback([&] { rc = cmd_eval(ev_o, ev_b, ev_synth, ev_samples); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  }
  return rc;
}

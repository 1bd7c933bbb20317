// SPDX-License-Identifier: Apache-2.0
#include "dr3d/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <variant>
#include <vector>

#include "dr3d/common.hpp"
#include "dr3d/image_io.hpp"

namespace dr3d {
namespace {

using Member = std::variant<int RunConfig::*, double RunConfig::*, std::uint64_t RunConfig::*>;

struct Field {
  const char* section;
  const char* key;
  Member member;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"run", "resolution", &RunConfig::resolution},
      {"run", "seed", &RunConfig::seed},

      {"camera", "radius", &RunConfig::cam_radius},
      {"camera", "fov_deg", &RunConfig::cam_fov_deg},
      {"camera", "near", &RunConfig::cam_near},
      {"camera", "far", &RunConfig::cam_far},
      {"camera", "yaw_min", &RunConfig::yaw_min},
      {"camera", "yaw_max", &RunConfig::yaw_max},
      {"camera", "pitch_min", &RunConfig::pitch_min},
      {"camera", "pitch_max", &RunConfig::pitch_max},

      {"generator", "z_dim", &RunConfig::z_dim},
      {"generator", "zd_dim", &RunConfig::zd_dim},
      {"generator", "w_dim", &RunConfig::w_dim},
      {"generator", "mapping_layers", &RunConfig::mapping_layers},
      {"generator", "mapping_width", &RunConfig::mapping_width},
      {"generator", "deform_width", &RunConfig::deform_width},
      {"generator", "base_res", &RunConfig::base_res},
      {"generator", "synth_blocks", &RunConfig::synth_blocks},
      {"generator", "synth_channels", &RunConfig::synth_channels},
      {"generator", "plane_channels", &RunConfig::plane_channels},
      {"generator", "plane_extent", &RunConfig::plane_extent},
      {"generator", "decoder_width", &RunConfig::decoder_width},

      {"discriminator", "base_channels", &RunConfig::d_base_channels},
      {"discriminator", "blocks", &RunConfig::d_blocks},
      {"discriminator", "pose_embed_dim", &RunConfig::pose_embed_dim},
      {"discriminator", "freeze_blocks", &RunConfig::freeze_blocks},

      {"pose_net", "base_channels", &RunConfig::p_base_channels},
      {"pose_net", "blocks", &RunConfig::p_blocks},

      {"render", "n_samples", &RunConfig::n_samples},

      {"loss", "alpha", &RunConfig::alpha},
      {"loss", "beta", &RunConfig::beta},
      {"loss", "gamma", &RunConfig::gamma},
      {"loss", "r1_weight", &RunConfig::r1_weight},
      {"loss", "r1_interval", &RunConfig::r1_interval},
      {"loss", "blur_ksize", &RunConfig::blur_ksize},
      {"loss", "blur_sigma", &RunConfig::blur_sigma},

      {"optim", "lr_g", &RunConfig::lr_g},
      {"optim", "lr_d", &RunConfig::lr_d},
      {"optim", "lr_p", &RunConfig::lr_p},
      {"optim", "adam_beta2", &RunConfig::adam_beta2},

      {"train", "batch_size", &RunConfig::batch_size},
      {"train", "pretrain_iterations", &RunConfig::pretrain_iterations},
      {"train", "adapt_iterations", &RunConfig::adapt_iterations},
      {"train", "checkpoint_interval", &RunConfig::checkpoint_interval},
      {"train", "log_flush_interval", &RunConfig::log_flush_interval},

      {"synthetic", "source_n", &RunConfig::synth_source_n},
      {"synthetic", "target_n", &RunConfig::synth_target_n},
      {"synthetic", "source_seed", &RunConfig::synth_source_seed},
      {"synthetic", "target_seed", &RunConfig::synth_target_seed},
      {"synthetic", "head_scale", &RunConfig::head_scale},
      {"synthetic", "palette_levels", &RunConfig::palette_levels},
      {"synthetic", "edge_threshold", &RunConfig::edge_threshold},
      {"synthetic", "edge_darkness", &RunConfig::edge_darkness},
      {"synthetic", "warp_strength", &RunConfig::warp_strength},

      {"inversion", "invert_steps", &RunConfig::invert_steps},
      {"inversion", "pivotal_steps", &RunConfig::pivotal_steps},
      {"inversion", "invert_lr", &RunConfig::invert_lr},
      {"inversion", "pivotal_lr", &RunConfig::pivotal_lr},
      {"inversion", "mean_w_samples", &RunConfig::mean_w_samples},
      {"inversion", "feature_weight", &RunConfig::feature_weight},

      {"eval", "samples", &RunConfig::eval_samples},
      {"eval", "feature_dim", &RunConfig::eval_feature_dim},
      {"eval", "extractor_seed", &RunConfig::eval_extractor_seed},
  };
  return f;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& v, const std::string& where) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(where + ": '" + v + "' is not an integer");
  return out;
}

double parse_float(const std::string& v, const std::string& where) {
  char* end = nullptr;
  errno = 0;
  double out = std::strtod(v.c_str(), &end);
  if (errno != 0 || end != v.c_str() + v.size() || v.empty())
    throw ConfigError(where + ": '" + v + "' is not a number");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round trip
  (void)ec;
  return std::string(buf, p);
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

std::map<std::string, std::map<std::string, std::string>> parse_toml(const std::string& text) {
  std::map<std::string, std::map<std::string, std::string>> out;
  std::string section;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    const std::string at = "line " + std::to_string(lineno);

    // Strip comments, respecting quoted strings.
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      check(line.back() == ']', at + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      check(!section.empty(), at + ": empty section name");
      for (char c : section)
        check(std::isalnum((unsigned char)c) || c == '_', at + ": bad section name '" + section + "'");
      out[section];  // materialize even if empty
      continue;
    }

    size_t eq = line.find('=');
    check(eq != std::string::npos, at + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    check(!key.empty(), at + ": empty key");
    for (char c : key)
      check(std::isalnum((unsigned char)c) || c == '_', at + ": bad key '" + key + "'");
    check(!section.empty(), at + ": key '" + key + "' outside any [section]");
    check(!val.empty(), at + ": key '" + key + "' has no value");
    if (val.front() == '"') {
      check(val.size() >= 2 && val.back() == '"', at + ": unterminated string");
      val = val.substr(1, val.size() - 2);
      check(val.find('"') == std::string::npos, at + ": embedded quotes unsupported");
    }
    check(out[section].count(key) == 0, at + ": duplicate key '" + key + "' in [" + section + "]");
    out[section][key] = val;
  }
  return out;
}

RunConfig RunConfig::from_toml(const std::string& text) {
  auto raw = parse_toml(text);
  RunConfig c;
  for (const auto& [section, kv] : raw) {
    for (const auto& [key, val] : kv) {
      const Field* match = nullptr;
      for (const Field& f : fields())
        if (section == f.section && key == f.key) {
          match = &f;
          break;
        }
      if (!match) {
        bool known_section = false;
        for (const Field& f : fields())
          if (section == f.section) known_section = true;
        throw ConfigError(known_section
                              ? "unknown key '" + key + "' in [" + section + "]"
                              : "unknown section [" + section + "]");
      }
      const std::string where = "[" + section + "] " + key;
      if (auto* pi = std::get_if<int RunConfig::*>(&match->member)) {
        long long v = parse_int(val, where);
        check(v >= INT32_MIN && v <= INT32_MAX, where + ": out of range");
        c.*(*pi) = (int)v;
      } else if (auto* pd = std::get_if<double RunConfig::*>(&match->member)) {
        c.*(*pd) = parse_float(val, where);
      } else {
        long long v = parse_int(val, where);
        check(v >= 0, where + ": must be non-negative");
        c.*(std::get<std::uint64_t RunConfig::*>(match->member)) = (std::uint64_t)v;
      }
    }
  }
  c.validate();
  return c;
}

std::string RunConfig::to_toml() const {
  std::string out;
  std::string cur;
  for (const Field& f : fields()) {
    if (cur != f.section) {
      if (!out.empty()) out += "\n";
      cur = f.section;
      out += "[" + cur + "]\n";
    }
    out += std::string(f.key) + " = ";
    if (auto* pi = std::get_if<int RunConfig::*>(&f.member))
      out += std::to_string(this->*(*pi));
    else if (auto* pd = std::get_if<double RunConfig::*>(&f.member))
      out += format_double(this->*(*pd));
    else
      out += std::to_string(this->*(std::get<std::uint64_t RunConfig::*>(f.member)));
    out += "\n";
  }
  return out;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_toml(read_file(path));
}

void RunConfig::validate() const {
  check(resolution >= 16 && (resolution & (resolution - 1)) == 0,
        "resolution must be a power of two >= 16");
  check(cam_radius > 0, "camera radius must be positive");
  check(cam_fov_deg > 0 && cam_fov_deg < 120, "fov_deg must be in (0, 120)");
  check(cam_near > 0 && cam_near < cam_far, "need 0 < near < far");
  check(yaw_min <= yaw_max, "yaw_min must not exceed yaw_max");
  check(pitch_min <= pitch_max, "pitch_min must not exceed pitch_max");
  check(std::max(std::abs(pitch_min), std::abs(pitch_max)) < kPi / 2 - 1e-3,
        "pitch range too close to the camera pole");
  check(z_dim >= 1 && zd_dim >= 1 && w_dim >= 1, "latent dims must be >= 1");
  check(mapping_layers >= 1 && mapping_width >= 1, "mapping net dims must be >= 1");
  check(deform_width >= 1 && decoder_width >= 1, "mlp widths must be >= 1");
  check(base_res >= 2 && synth_blocks >= 2, "need base_res >= 2 and synth_blocks >= 2");
  check(synth_channels >= 1 && plane_channels >= 1, "channel counts must be >= 1");
  check(plane_extent > 0, "plane_extent must be positive");
  check(d_base_channels >= 1 && d_blocks >= 1, "discriminator dims must be >= 1");
  check(pose_embed_dim >= 1, "pose_embed_dim must be >= 1");
  check(freeze_blocks >= 0 && freeze_blocks <= d_blocks,
        "freeze_blocks must be within the discriminator depth");
  check(resolution % (1 << d_blocks) == 0, "resolution must divide by 2^blocks (discriminator)");
  check(p_base_channels >= 1 && p_blocks >= 1, "pose net dims must be >= 1");
  check(resolution % (1 << p_blocks) == 0, "resolution must divide by 2^blocks (pose net)");
  check(n_samples >= 2, "n_samples must be >= 2");
  check(alpha >= 0 && beta >= 0 && gamma >= 0, "loss weights must be non-negative");
  check(r1_weight >= 0, "r1_weight must be non-negative");
  check(r1_interval >= 1, "r1_interval must be >= 1");
  check(blur_ksize >= 1 && blur_ksize % 2 == 1, "blur_ksize must be odd and positive");
  check(blur_sigma > 0, "blur_sigma must be positive");
  check(lr_g > 0 && lr_d > 0 && lr_p > 0, "learning rates must be positive");
  check(adam_beta2 > 0 && adam_beta2 < 1, "adam_beta2 must be in (0, 1)");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(pretrain_iterations >= 0 && adapt_iterations >= 0, "iteration counts must be >= 0");
  check(checkpoint_interval >= 1 && log_flush_interval >= 1, "intervals must be >= 1");
  check(synth_source_n >= 1 && synth_target_n >= 1, "synthetic dataset sizes must be >= 1");
  check(head_scale >= 0, "head_scale must be >= 0 (0 = auto)");
  check(palette_levels >= 2, "palette_levels must be >= 2");
  check(edge_threshold > 0 && edge_darkness >= 0 && edge_darkness <= 1,
        "edge style parameters out of range");
  check(warp_strength >= 0, "warp_strength must be >= 0");
  check(invert_steps >= 0 && pivotal_steps >= 0, "inversion step counts invalid");
  check(invert_lr > 0 && pivotal_lr > 0, "inversion learning rates must be positive");
  check(mean_w_samples >= 1, "mean_w_samples must be >= 1");
  check(feature_weight >= 0, "feature_weight must be >= 0");
  check(eval_samples >= 2, "eval_samples must be >= 2");
  check(eval_feature_dim >= 2, "eval_feature_dim must be >= 2");
  generator_config().validate();
}

GeneratorConfig RunConfig::generator_config() const {
  GeneratorConfig g;
  g.z_dim = z_dim;
  g.zd_dim = zd_dim;
  g.w_dim = w_dim;
  g.mapping_layers = mapping_layers;
  g.mapping_width = mapping_width;
  g.deform_width = deform_width;
  g.base_res = base_res;
  g.synth_blocks = synth_blocks;
  g.synth_channels = synth_channels;
  g.plane_res = base_res << (synth_blocks - 1);
  g.plane_channels = plane_channels;
  g.extent = plane_extent;
  g.decoder_width = decoder_width;
  return g;
}

DiscriminatorConfig RunConfig::discriminator_config() const {
  DiscriminatorConfig d;
  d.resolution = resolution;
  d.base_channels = d_base_channels;
  d.n_blocks = d_blocks;
  d.pose_embed_dim = pose_embed_dim;
  d.freeze_blocks = freeze_blocks;
  return d;
}

PoseEstimatorConfig RunConfig::pose_estimator_config() const {
  PoseEstimatorConfig p;
  p.resolution = resolution;
  p.base_channels = p_base_channels;
  p.n_blocks = p_blocks;
  return p;
}

RenderParams RunConfig::render_params() const {
  RenderParams r;
  r.h = resolution;
  r.w = resolution;
  r.n_samples = n_samples;
  r.near = cam_near;
  r.far = cam_far;
  return r;
}

PosePrior RunConfig::pose_prior() const {
  PosePrior p;
  p.yaw_min = yaw_min;
  p.yaw_max = yaw_max;
  p.pitch_min = pitch_min;
  p.pitch_max = pitch_max;
  return p;
}

SyntheticStyle RunConfig::synthetic_style() const {
  SyntheticStyle s;
  s.head_scale = head_scale;
  s.palette_levels = palette_levels;
  s.edge_threshold = edge_threshold;
  s.edge_darkness = edge_darkness;
  s.warp_strength = warp_strength;
  return s;
}

CameraPose RunConfig::base_pose() const {
  CameraPose p;
  p.yaw = 0;
  p.pitch = 0;
  p.radius = cam_radius;
  p.fov = cam_fov_deg * kPi / 180.0;
  return p;
}

void require_same_architecture(const RunConfig& a, const RunConfig& b) {
  std::string bad;
  auto same_i = [&](const char* name, int x, int y) {
    if (x != y) bad += std::string(bad.empty() ? "" : ", ") + name;
  };
  auto same_d = [&](const char* name, double x, double y) {
    if (x != y) bad += std::string(bad.empty() ? "" : ", ") + name;
  };
  same_i("resolution", a.resolution, b.resolution);
  same_i("z_dim", a.z_dim, b.z_dim);
  same_i("zd_dim", a.zd_dim, b.zd_dim);
  same_i("w_dim", a.w_dim, b.w_dim);
  same_i("mapping_layers", a.mapping_layers, b.mapping_layers);
  same_i("mapping_width", a.mapping_width, b.mapping_width);
  same_i("deform_width", a.deform_width, b.deform_width);
  same_i("base_res", a.base_res, b.base_res);
  same_i("synth_blocks", a.synth_blocks, b.synth_blocks);
  same_i("synth_channels", a.synth_channels, b.synth_channels);
  same_i("plane_channels", a.plane_channels, b.plane_channels);
  same_d("plane_extent", a.plane_extent, b.plane_extent);
  same_i("decoder_width", a.decoder_width, b.decoder_width);
  same_i("d_base_channels", a.d_base_channels, b.d_base_channels);
  same_i("d_blocks", a.d_blocks, b.d_blocks);
  same_i("pose_embed_dim", a.pose_embed_dim, b.pose_embed_dim);
  same_i("p_base_channels", a.p_base_channels, b.p_base_channels);
  same_i("p_blocks", a.p_blocks, b.p_blocks);
  if (!bad.empty())
    throw ConfigError("config does not match the checkpoint architecture on: " + bad);
}

}  // namespace dr3d

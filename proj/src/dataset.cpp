// SPDX-License-Identifier: Apache-2.0
#include "dr3d/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "dr3d/image_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace dr3d {

namespace {

std::string sample_stem(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%06d", i);
  return buf;
}

// FNV-1a, stable across builds; keys cache directories by their parameters.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

void write_dataset(const std::string& dir, const SyntheticDomain& dom) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("create_directories " + dir + ": " + ec.message());
  nlohmann::json samples = nlohmann::json::array();
  for (int i = 0; i < int(dom.samples.size()); ++i) {
    const SyntheticSample& s = dom.samples[std::size_t(i)];
    const std::string stem = sample_stem(i);
    write_png(dir + "/" + stem + ".png", s.image);
    write_npy(dir + "/" + stem + "_depth.npy", s.depth);
    samples.push_back({{"image", stem + ".png"},
                       {"yaw", s.pose.yaw},
                       {"pitch", s.pose.pitch},
                       {"depth", stem + "_depth.npy"}});
  }
  nlohmann::json index = {{"kind", dom.kind}, {"samples", samples}};
  atomic_write_file(dir + "/index.json", index.dump(2) + "\n");
}

LoadedDataset load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
  LoadedDataset out;
  const std::string index_path = dir + "/index.json";
  if (fs::exists(index_path)) {
    nlohmann::json index;
    try {
      index = nlohmann::json::parse(read_file(index_path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(index_path + ": " + e.what());
    }
    if (!index.contains("samples") || !index["samples"].is_array())
      throw ConfigError(index_path + ": missing \"samples\" array");
    int with_pose = 0, with_depth = 0;
    for (const auto& s : index["samples"]) {
      if (!s.contains("image"))
        throw ConfigError(index_path + ": sample entry without \"image\"");
      if (s.contains("yaw") != s.contains("pitch"))
        throw ConfigError(index_path + ": sample with only one of yaw/pitch");
      out.data.images.push_back(read_png(dir + "/" + s["image"].get<std::string>()));
      if (s.contains("yaw")) {
        out.data.poses.emplace_back(s["yaw"].get<double>(), s["pitch"].get<double>());
        ++with_pose;
      }
      if (s.contains("depth")) {
        out.depths.push_back(read_npy_mat(dir + "/" + s["depth"].get<std::string>()));
        ++with_depth;
      }
    }
    const int n = int(out.data.images.size());
    if (with_pose != 0 && with_pose != n)
      throw ConfigError(index_path + ": poses must cover all samples or none");
    if (with_depth != 0 && with_depth != n)
      throw ConfigError(index_path + ": depths must cover all samples or none");
  } else {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png")
        names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const auto& n : names) out.data.images.push_back(read_png(dir + "/" + n));
  }
  if (out.data.images.empty()) throw IoError("no images in dataset: " + dir);
  return out;
}

LoadedDataset synthetic_dataset(const std::string& kind, const RunConfig& cfg) {
  const bool source = kind == "source";
  if (!source && kind != "target")
    throw ConfigError("synthetic domain kind must be source or target, got " + kind);
  const int n = source ? cfg.synth_source_n : cfg.synth_target_n;
  const std::uint64_t seed = source ? cfg.synth_source_seed : cfg.synth_target_seed;
  const SyntheticStyle style = cfg.synthetic_style();

  auto make = [&] {
    return make_synthetic_domain(kind, n, seed, cfg.resolution, cfg.cam_radius,
                                 cfg.cam_fov_deg * kPi / 180.0, cfg.pose_prior(),
                                 cfg.cam_far, style);
  };

  const char* cache = std::getenv("DR3D_CACHE");
  if (cache == nullptr || *cache == '\0') {
    const SyntheticDomain dom = make();
    LoadedDataset out;
    out.data = dataset_from_domain(dom);
    for (const auto& s : dom.samples) out.depths.push_back(s.depth);
    return out;
  }

  char sig[512];
  std::snprintf(sig, sizeof sig, "%s|%d|%llu|%d|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%d|%.17g|%.17g|%.17g",
                kind.c_str(), n, static_cast<unsigned long long>(seed),
                cfg.resolution, cfg.cam_radius, cfg.cam_fov_deg, cfg.cam_far,
                cfg.yaw_min, cfg.yaw_max, cfg.pitch_min, cfg.pitch_max,
                style.head_scale, style.palette_levels, style.edge_threshold,
                style.edge_darkness, style.warp_strength);
  char sub[64];
  std::snprintf(sub, sizeof sub, "%s-%016llx", kind.c_str(),
                static_cast<unsigned long long>(fnv1a(sig)));
  const std::string dir = std::string(cache) + "/" + sub;
  if (!fs::exists(dir + "/index.json")) write_dataset(dir, make());
  return load_dataset(dir);
}

}  // namespace dr3d

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dr3d/adaptation.hpp"
#include "dr3d/config.hpp"
#include "dr3d/synthetic.hpp"

namespace dr3d {

// A dataset directory holds PNG images plus an optional index.json mapping
// each file to its pose and depth map. A directory without an index is read
// as a bare folder of *.png in name order, unposed (the drawing-domain case).
struct LoadedDataset {
  Dataset data;
  std::vector<Mat> depths;  // aligned with images; empty when the index has none
  bool has_depths() const { return !depths.empty(); }
};

// Writes sample_%06d.png, sample_%06d_depth.npy, then index.json last and
// atomically, so a torn write never yields a loadable directory.
void write_dataset(const std::string& dir, const SyntheticDomain& dom);

LoadedDataset load_dataset(const std::string& dir);

// The built-in procedural domain ("source" or "target") under cfg's camera,
// counts, and style. With DR3D_CACHE set, the domain is materialized once in
// the on-disk dataset format under that directory and reloaded from it, so
// cached runs see the same 8-bit-quantized images on every invocation.
LoadedDataset synthetic_dataset(const std::string& kind, const RunConfig& cfg);

}  // namespace dr3d

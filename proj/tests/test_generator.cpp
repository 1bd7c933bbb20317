// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dr3d/generator.hpp"
#include "testutil.hpp"

using namespace dr3d;

namespace {

GeneratorConfig tiny_config() {
  GeneratorConfig cfg;
  cfg.z_dim = 6;
  cfg.zd_dim = 4;
  cfg.w_dim = 6;
  cfg.mapping_layers = 3;
  cfg.mapping_width = 8;
  cfg.deform_width = 8;
  cfg.base_res = 4;
  cfg.synth_blocks = 2;
  cfg.synth_channels = 6;
  cfg.plane_res = 8;
  cfg.plane_channels = 3;
  cfg.decoder_width = 8;
  return cfg;
}

Vec random_vec(int n, Rng& rng) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("mapping is deterministic with the right dimensions") {
  Generator g;
  Rng rng(41);
  g.init(tiny_config(), rng);
  Rng zr(42);
  const Vec z = random_vec(6, zr);
  const Vec w1 = g.map_latent(z);
  const Vec w2 = g.map_latent(z);
  CHECK(w1.size() == 6);
  CHECK(w1 == w2);
}

TEST_CASE("mapping backward matches a finite-difference Jacobian product") {
  Generator g;
  Rng rng(43);
  g.init(tiny_config(), rng);
  Rng zr(44);
  Vec z = random_vec(6, zr);
  const Vec gw = random_vec(6, zr);

  auto loss = [&]() { return g.mapping.forward(z).dot(gw); };

  Mapping::Trace tr;
  g.mapping.forward(z, &tr);
  nn::ParamRefs refs;
  g.mapping.collect(refs, "m");
  nn::zero_grads(refs);
  const Vec gz = g.mapping.backward(tr, gw);
  for (int i = 0; i < z.size(); ++i)
    CHECK(testutil::check_grad(&z[i], gz[i], loss));
  for (const auto& r : refs)
    for (int i = 0; i < r.value->size(); i += 3)
      CHECK(testutil::check_grad(&r.value->data()[i], r.grad->data()[i], loss));
}

TEST_CASE("deformation residual is exactly zero at init") {
  Generator g;
  Rng rng(45);
  g.init(tiny_config(), rng);
  Rng zr(46);
  const Tensor r1 = g.deform.forward(random_vec(4, zr));
  CHECK(r1.data.cwiseAbs().maxCoeff() == 0.0);

  // Same z, different zd: identical output bits while the head is zero.
  const Vec z = random_vec(6, zr);
  RenderParams rp;
  rp.h = rp.w = 6;
  rp.n_samples = 5;
  const RenderOutput a = g.generate(z, random_vec(4, zr), CameraPose{}, rp, 9);
  const RenderOutput b = g.generate(z, random_vec(4, zr), CameraPose{}, rp, 9);
  CHECK(a.image.data == b.image.data);
  CHECK(a.depth == b.depth);
}

TEST_CASE("zd reaches the output once the head is non-zero") {
  Generator g;
  Rng rng(47);
  g.init(tiny_config(), rng);
  for (int i = 0; i < g.deform.head.W.size(); i += 2)
    g.deform.head.W.data()[i] = 0.05 * rng.normal();
  Rng zr(48);
  const Vec z = random_vec(6, zr);
  RenderParams rp;
  rp.h = rp.w = 6;
  rp.n_samples = 5;
  const RenderOutput a = g.generate(z, random_vec(4, zr), CameraPose{}, rp, 9);
  const RenderOutput b = g.generate(z, random_vec(4, zr), CameraPose{}, rp, 9);
  CHECK(a.image.data != b.image.data);
}

TEST_CASE("demodulated effective weights have unit row norms") {
  Generator g;
  Rng rng(49);
  g.init(tiny_config(), rng);
  Rng zr(50);
  const Vec w = random_vec(6, zr);
  for (const auto& blk : g.blocks) {
    const Mat w2 = blk.modulated_weights(w, true);
    for (int o = 0; o < w2.rows(); ++o)
      CHECK(std::abs(w2.row(o).norm() - 1.0) < 1e-4);
  }
}

TEST_CASE("scaling the style scales pre-demodulation weights linearly") {
  Generator g;
  Rng rng(51);
  g.init(tiny_config(), rng);
  Rng zr(52);
  const Vec w = random_vec(6, zr);
  SynthBlock& blk = g.blocks[0];
  const Mat w1 = blk.modulated_weights(w, false);
  blk.affine.W *= 3.0;
  blk.affine.b *= 3.0;
  const Mat w1_scaled = blk.modulated_weights(w, false);
  CHECK((w1_scaled - 3.0 * w1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("image is in (0,1) and depth within the ray interval") {
  Generator g;
  Rng rng(53);
  g.init(tiny_config(), rng);
  Rng zr(54);
  RenderParams rp;
  rp.h = rp.w = 8;
  rp.n_samples = 8;
  const RenderOutput out =
      g.generate(random_vec(6, zr), random_vec(4, zr), CameraPose{}, rp, 3);
  for (Eigen::Index i = 0; i < out.image.data.size(); ++i) {
    CHECK(out.image.data[i] >= 0.0);
    CHECK(out.image.data[i] < 1.0);
  }
  for (int i = 0; i < out.depth.size(); ++i) {
    CHECK(out.depth.data()[i] >= rp.near);
    CHECK(out.depth.data()[i] <= rp.far);
  }
}

TEST_CASE("full generator gradients match finite differences") {
  Generator g;
  Rng rng(55);
  g.init(tiny_config(), rng);
  // Give the deformation head mass so gzd is non-trivial.
  for (int i = 0; i < g.deform.head.W.size(); ++i)
    g.deform.head.W.data()[i] = 0.03 * rng.normal();

  Rng zr(56);
  Vec z = random_vec(6, zr);
  Vec zd = random_vec(4, zr);
  CameraPose pose;
  pose.yaw = 0.2;
  pose.pitch = -0.1;
  RenderParams rp;
  rp.h = rp.w = 4;
  rp.n_samples = 5;
  const std::uint64_t seed = 17;

  Tensor gimg(3, rp.h, rp.w);
  Mat gdep(rp.h, rp.w);
  Rng grng(57);
  for (Eigen::Index i = 0; i < gimg.data.size(); ++i) gimg.data[i] = grng.normal();
  for (int i = 0; i < gdep.size(); ++i) gdep.data()[i] = grng.normal();

  auto loss = [&]() {
    const RenderOutput out = g.generate(z, zd, pose, rp, seed);
    return out.image.data.dot(gimg.data) + (out.depth.array() * gdep.array()).sum();
  };

  Generator::Trace tr;
  g.generate(z, zd, pose, rp, seed, &tr);
  nn::ParamRefs refs;
  g.collect(refs, "g");
  nn::zero_grads(refs);
  const Generator::InputGrads ig = g.backward(tr, gimg, gdep);

  for (int i = 0; i < z.size(); ++i)
    CHECK(testutil::check_grad(&z[i], ig.gz[i], loss));
  for (int i = 0; i < zd.size(); ++i)
    CHECK(testutil::check_grad(&zd[i], ig.gzd[i], loss));

  int checked = 0, failed = 0;
  for (const auto& r : refs) {
    const int stride = std::max<int>(1, int(r.value->size()) / 6);
    for (int i = 0; i < r.value->size(); i += stride) {
      if (!testutil::check_grad(&r.value->data()[i], r.grad->data()[i], loss, 1e-5,
                                2e-3))
        ++failed;
      ++checked;
    }
  }
  CHECK(checked > 60);
  CHECK(failed == 0);
}

TEST_CASE("generate equals make_planes plus render") {
  Generator g;
  Rng rng(58);
  g.init(tiny_config(), rng);
  Rng zr(59);
  const Vec z = random_vec(6, zr);
  const Vec zd = random_vec(4, zr);
  RenderParams rp;
  rp.h = rp.w = 6;
  rp.n_samples = 6;
  const RenderOutput a = g.generate(z, zd, CameraPose{}, rp, 21);
  const TriPlane tp = g.make_planes(g.map_latent(z), zd);
  const RenderOutput b = render(tp, g.decoder, CameraPose{}, rp, 21);
  CHECK(a.image.data == b.image.data);
  CHECK(a.depth == b.depth);
}

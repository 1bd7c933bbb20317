// SPDX-License-Identifier: Apache-2.0
#include <unistd.h>

#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "dr3d/checkpoint.hpp"
#include "dr3d/common.hpp"
#include "dr3d/config.hpp"
#include "dr3d/image_io.hpp"
#include "dr3d/rng.hpp"
#include "testutil.hpp"

using namespace dr3d;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path p;
  TempDir() {
    p = fs::temp_directory_path() / ("dr3d_io_" + std::to_string(::getpid()));
    fs::create_directories(p);
  }
  ~TempDir() { fs::remove_all(p); }
  std::string file(const std::string& name) const { return (p / name).string(); }
};

template <class E, class F>
std::string thrown_message(F&& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("png round trip is exact on the 8-bit grid") {
  TempDir td;
  Tensor img(3, 9, 7);
  Rng rng(4);
  for (Eigen::Index i = 0; i < img.data.size(); ++i)
    img.data[i] = double(rng.index(256)) / 255.0;
  write_png(td.file("a.png"), img);
  Tensor back = read_png(td.file("a.png"));
  REQUIRE(back.h == 9);
  REQUIRE(back.w == 7);
  CHECK((back.data - img.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("png quantization error is bounded by half a step") {
  TempDir td;
  Tensor img(3, 8, 8);
  Rng rng(5);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data[i] = rng.uniform();
  write_png(td.file("b.png"), img);
  Tensor back = read_png(td.file("b.png"));
  CHECK((back.data - img.data).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("png reader rejects non-png bytes") {
  TempDir td;
  atomic_write_file(td.file("junk.png"), "this is not a png at all");
  CHECK_THROWS_AS(read_png(td.file("junk.png")), IoError);
  CHECK_THROWS_AS(read_png(td.file("missing.png")), IoError);
}

TEST_CASE("npy matrix round trips at float32 precision") {
  TempDir td;
  Mat m(5, 3);
  Rng rng(6);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = rng.normal() * 3.0;
  write_npy(td.file("m.npy"), m);
  Mat back = read_npy_mat(td.file("m.npy"));
  REQUIRE(back.rows() == 5);
  REQUIRE(back.cols() == 3);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 3; ++c) CHECK(back(r, c) == double((float)m(r, c)));

  const std::string bytes = read_file(td.file("m.npy"));
  CHECK(bytes.compare(0, 6, "\x93NUMPY") == 0);
  CHECK(bytes.find("'descr': '<f4'") != std::string::npos);
  CHECK(bytes.find("(5, 3)") != std::string::npos);
  CHECK((10 + ((unsigned char)bytes[8] | ((unsigned char)bytes[9] << 8))) % 64 == 0);
}

TEST_CASE("npy tensor header carries the channel-major shape") {
  TempDir td;
  Tensor t(3, 4, 2);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = double(i) * 0.5;
  write_npy(td.file("t.npy"), t);
  const std::string bytes = read_file(td.file("t.npy"));
  CHECK(bytes.find("(3, 4, 2)") != std::string::npos);
  // Payload order matches the in-memory (c, y, x) layout.
  size_t hlen = 10 + ((unsigned char)bytes[8] | ((unsigned char)bytes[9] << 8));
  float f0, f1;
  std::memcpy(&f0, bytes.data() + hlen, 4);
  std::memcpy(&f1, bytes.data() + hlen + 4, 4);
  CHECK(f0 == 0.0f);
  CHECK(f1 == 0.5f);
}

TEST_CASE("atomic writes leave no temp files behind") {
  TempDir td;
  atomic_write_file(td.file("x.bin"), std::string("\x01\x02\x00\x03", 4));
  CHECK(read_file(td.file("x.bin")) == std::string("\x01\x02\x00\x03", 4));
  int entries = 0;
  for (const auto& e : fs::directory_iterator(td.p)) {
    ++entries;
    CHECK(e.path().filename().string() == "x.bin");
  }
  CHECK(entries == 1);
}

TEST_CASE("checkpoint round trip is byte identical") {
  TempDir td;
  Checkpoint ck;
  Mat m(3, 2);
  m << 1.5, -2.25, 0.0, 1e-300, 3.0, -0.5;
  ck.put_mat("gen/w", m);
  ck.put_i64("iter", 42);
  ck.put_f64("lr", 0.00125);
  ck.put_bytes("config", "[run]\nseed = 1\n");
  ck.save(td.file("c.ckpt"));

  Checkpoint back = Checkpoint::load(td.file("c.ckpt"));
  CHECK(back.get_mat("gen/w") == m);
  CHECK(back.get_i64("iter") == 42);
  CHECK(back.get_f64("lr") == 0.00125);
  CHECK(back.get_bytes("config") == "[run]\nseed = 1\n");
  CHECK(back.serialize() == ck.serialize());

  back.save(td.file("c2.ckpt"));
  CHECK(read_file(td.file("c.ckpt")) == read_file(td.file("c2.ckpt")));
}

TEST_CASE("checkpoint upsert replaces in place, keeping order") {
  Checkpoint ck;
  ck.put_i64("a", 1);
  ck.put_i64("b", 2);
  ck.put_i64("a", 7);
  REQUIRE(ck.records().size() == 2);
  CHECK(ck.records()[0].name == "a");
  CHECK(ck.get_i64("a") == 7);
  auto names = ck.names_with_prefix("a");
  REQUIRE(names.size() == 1);
}

TEST_CASE("checkpoint rejects tampered or truncated bytes") {
  Checkpoint ck;
  ck.put_i64("x", 5);
  std::string bytes = ck.serialize();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::deserialize(bad_magic), IoError);

  std::string bad_version = bytes;
  bad_version[8] = 9;
  CHECK(thrown_message<IoError>([&] { Checkpoint::deserialize(bad_version); })
            .find("version") != std::string::npos);

  CHECK_THROWS_AS(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 3)), IoError);
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes + "zz"), IoError);

  CHECK_THROWS_AS(ck.get_i64("missing"), IoError);
  CHECK_THROWS_AS(ck.get_f64("x"), IoError);   // dtype mismatch
  CHECK_THROWS_AS(ck.get_bytes("x"), IoError);
}

TEST_CASE("config text round trips exactly") {
  RunConfig c;
  c.alpha = 0.3;
  c.lr_g = 0.00125;
  c.seed = 123456789012345ull;
  const std::string t1 = c.to_toml();
  RunConfig back = RunConfig::from_toml(t1);
  CHECK(back.to_toml() == t1);
  CHECK(back.alpha == 0.3);
  CHECK(back.lr_g == 0.00125);
  CHECK(back.seed == 123456789012345ull);
}

TEST_CASE("config parser handles comments, spacing, strings") {
  auto raw = parse_toml("# top\n[run]\n  seed = 9   # tail comment\n\n[loss]\nalpha = 0.5\n");
  CHECK(raw["run"]["seed"] == "9");
  CHECK(raw["loss"]["alpha"] == "0.5");
  auto rs = parse_toml("[a]\nname = \"x # not a comment\"\n");
  CHECK(rs["a"]["name"] == "x # not a comment");
}

TEST_CASE("config errors are specific") {
  CHECK(thrown_message<ConfigError>([] { RunConfig::from_toml("[run]\nsede = 1\n"); })
            .find("sede") != std::string::npos);
  CHECK(thrown_message<ConfigError>([] { RunConfig::from_toml("[rnu]\nseed = 1\n"); })
            .find("[rnu]") != std::string::npos);
  CHECK_THROWS_AS(RunConfig::from_toml("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_toml("[run]\nseed = banana\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_toml("seed = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_toml("[run]\nresolution = 33\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_toml("[camera]\nnear = 5.0\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_toml("[loss]\nblur_ksize = 4\n"), ConfigError);
}

TEST_CASE("config derives consistent module configs") {
  RunConfig c;
  c.base_res = 4;
  c.synth_blocks = 3;
  GeneratorConfig g = c.generator_config();
  CHECK(g.plane_res == 16);
  CHECK_NOTHROW(g.validate());
  RenderParams rp = c.render_params();
  CHECK(rp.h == c.resolution);
  CHECK(rp.near == c.cam_near);
  CameraPose bp = c.base_pose();
  CHECK(bp.fov == doctest::Approx(c.cam_fov_deg * kPi / 180.0));
  PosePrior pr = c.pose_prior();
  CHECK(pr.yaw_min == c.yaw_min);
}

TEST_CASE("config load reads a file") {
  TempDir td;
  atomic_write_file(td.file("r.toml"), "[run]\nresolution = 16\nseed = 3\n");
  RunConfig c = RunConfig::load(td.file("r.toml"));
  CHECK(c.resolution == 16);
  CHECK(c.seed == 3);
  CHECK(c.alpha == 1.0);  // untouched defaults survive
}

// SPDX-License-Identifier: Apache-2.0
#include "dr3d/checkpoint.hpp"

#include <cstring>

#include "dr3d/common.hpp"
#include "dr3d/image_io.hpp"

namespace dr3d {
namespace {

constexpr char kMagic[8] = {'D', 'R', '3', 'D', 'C', 'K', 'P', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((char)((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((char)((v >> (8 * i)) & 0xff));
}

struct Cursor {
  const std::string& s;
  std::size_t off = 0;
  void need(std::size_t n) const {
    if (off + n > s.size()) throw IoError("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= (std::uint32_t)(unsigned char)s[off + i] << (8 * i);
    off += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= (std::uint64_t)(unsigned char)s[off + i] << (8 * i);
    off += 8;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return (std::uint8_t)s[off++];
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string v = s.substr(off, n);
    off += n;
    return v;
  }
};

}  // namespace

Checkpoint::Record& Checkpoint::upsert(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) {
    Record& r = records_[it->second];
    r.dims.clear();
    r.payload.clear();
    return r;
  }
  index_[name] = records_.size();
  records_.push_back(Record{name, 0, {}, {}});
  return records_.back();
}

const Checkpoint::Record& Checkpoint::require(const std::string& name,
                                              std::uint8_t dtype) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw IoError("checkpoint record missing: " + name);
  const Record& r = records_[it->second];
  if (r.dtype != dtype)
    throw IoError("checkpoint record '" + name + "' has dtype " +
                  std::to_string(r.dtype) + ", wanted " + std::to_string(dtype));
  return r;
}

void Checkpoint::put_mat(const std::string& name, const Mat& m) {
  Record& r = upsert(name);
  r.dtype = 0;
  r.dims = {(std::uint64_t)m.rows(), (std::uint64_t)m.cols()};
  r.payload.assign((const char*)m.data(), sizeof(double) * (size_t)m.size());
}

void Checkpoint::put_f64(const std::string& name, double v) {
  Record& r = upsert(name);
  r.dtype = 0;
  r.payload.assign((const char*)&v, sizeof(double));
}

void Checkpoint::put_i64(const std::string& name, std::int64_t v) {
  Record& r = upsert(name);
  r.dtype = 1;
  r.payload.assign((const char*)&v, sizeof(v));
}

void Checkpoint::put_bytes(const std::string& name, const std::string& v) {
  Record& r = upsert(name);
  r.dtype = 2;
  r.payload = v;
}

Mat Checkpoint::get_mat(const std::string& name) const {
  const Record& r = require(name, 0);
  if (r.dims.size() != 2) throw IoError("checkpoint record '" + name + "' is not a matrix");
  Mat m((Eigen::Index)r.dims[0], (Eigen::Index)r.dims[1]);
  if (r.payload.size() != sizeof(double) * (size_t)m.size())
    throw IoError("checkpoint record '" + name + "' payload size mismatch");
  std::memcpy(m.data(), r.payload.data(), r.payload.size());
  return m;
}

double Checkpoint::get_f64(const std::string& name) const {
  const Record& r = require(name, 0);
  if (!r.dims.empty() || r.payload.size() != sizeof(double))
    throw IoError("checkpoint record '" + name + "' is not a scalar");
  double v;
  std::memcpy(&v, r.payload.data(), sizeof(double));
  return v;
}

std::int64_t Checkpoint::get_i64(const std::string& name) const {
  const Record& r = require(name, 1);
  if (r.payload.size() != sizeof(std::int64_t))
    throw IoError("checkpoint record '" + name + "' is not an i64");
  std::int64_t v;
  std::memcpy(&v, r.payload.data(), sizeof(v));
  return v;
}

const std::string& Checkpoint::get_bytes(const std::string& name) const {
  return require(name, 2).payload;
}

std::vector<std::string> Checkpoint::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const Record& r : records_)
    if (r.name.compare(0, prefix.size(), prefix) == 0) out.push_back(r.name);
  return out;
}

std::string Checkpoint::serialize() const {
  std::string out(kMagic, 8);
  put_u32(out, kVersion);
  put_u64(out, records_.size());
  for (const Record& r : records_) {
    put_u32(out, (std::uint32_t)r.name.size());
    out += r.name;
    out.push_back((char)r.dtype);
    out.push_back((char)r.dims.size());
    for (std::uint64_t d : r.dims) put_u64(out, d);
    put_u64(out, r.payload.size());
    out += r.payload;
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Cursor c{bytes};
  if (c.bytes(8) != std::string(kMagic, 8)) throw IoError("bad checkpoint magic");
  const std::uint32_t ver = c.u32();
  if (ver != kVersion)
    throw IoError("checkpoint version " + std::to_string(ver) + " unsupported, want " +
                  std::to_string(kVersion));
  const std::uint64_t count = c.u64();
  Checkpoint ck;
  for (std::uint64_t i = 0; i < count; ++i) {
    Record r;
    r.name = c.bytes(c.u32());
    r.dtype = c.u8();
    if (r.dtype > 2) throw IoError("checkpoint record '" + r.name + "' has unknown dtype");
    const int ndim = c.u8();
    for (int d = 0; d < ndim; ++d) r.dims.push_back(c.u64());
    r.payload = c.bytes(c.u64());
    if (ck.index_.count(r.name)) throw IoError("duplicate checkpoint record: " + r.name);
    ck.index_[r.name] = ck.records_.size();
    ck.records_.push_back(std::move(r));
  }
  if (c.off != bytes.size()) throw IoError("trailing bytes after checkpoint records");
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  atomic_write_file(path, serialize());
}

Checkpoint Checkpoint::load(const std::string& path) {
  return deserialize(read_file(path));
}

}  // namespace dr3d

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dr3d/tensor.hpp"

namespace dr3d {

// Flat container of named records with a fixed little-endian byte layout:
//   magic "DR3DCKPT" | u32 version=1 | u64 record_count | records...
//   record: u32 name_len | name | u8 dtype | u8 ndim | u64 dims[ndim]
//           | u64 payload_len | payload
// dtype 0 = f64 (matrices column-major, scalars ndim 0), 1 = i64, 2 = bytes.
// Record order is insertion order and is preserved by load, so
// save -> load -> save is byte-identical.
class Checkpoint {
 public:
  struct Record {
    std::string name;
    std::uint8_t dtype = 0;
    std::vector<std::uint64_t> dims;
    std::string payload;
  };

  static constexpr std::uint32_t kVersion = 1;

  void put_mat(const std::string& name, const Mat& m);
  void put_f64(const std::string& name, double v);
  void put_i64(const std::string& name, std::int64_t v);
  void put_bytes(const std::string& name, const std::string& v);

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Mat get_mat(const std::string& name) const;
  double get_f64(const std::string& name) const;
  std::int64_t get_i64(const std::string& name) const;
  const std::string& get_bytes(const std::string& name) const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);
  void save(const std::string& path) const;  // atomic
  static Checkpoint load(const std::string& path);

  const std::vector<Record>& records() const { return records_; }
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

 private:
  Record& upsert(const std::string& name);
  const Record& require(const std::string& name, std::uint8_t dtype) const;

  std::vector<Record> records_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace dr3d

// SPDX-License-Identifier: Apache-2.0
//
// Single-file named-array container shared by datasets and checkpoints.
//
// Layout (little-endian):
//   "GENBNARC"                          8-byte magic
//   u32 container_version               currently 1
//   u64 meta_len, meta_len bytes        "key=value\n" text record
//   u32 array_count
//   repeated array_count times:
//     u32 name_len, name bytes
//     u8  dtype                         1=float32 2=int32 3=float64
//     u32 rank, rank x u64 dims
//     raw row-major element data
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace genb {

enum class DType : std::uint8_t { kFloat32 = 1, kInt32 = 2, kFloat64 = 3 };

const char* dtype_name(DType d);
std::size_t dtype_size(DType d);

struct NamedArray {
  DType dtype = DType::kFloat64;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> bytes;

  std::int64_t element_count() const;
};

class Archive {
 public:
  void set_meta(const std::string& key, const std::string& value);
  bool has_meta(const std::string& key) const;
  /// Throws FormatError naming `key` when absent.
  const std::string& meta(const std::string& key) const;
  const std::map<std::string, std::string>& metadata() const { return meta_; }

  void put(const std::string& name, std::vector<std::int64_t> shape, std::span<const float> data);
  void put(const std::string& name, std::vector<std::int64_t> shape, std::span<const std::int32_t> data);
  void put(const std::string& name, std::vector<std::int64_t> shape, std::span<const double> data);

  bool contains(const std::string& name) const { return arrays_.count(name) != 0; }
  const NamedArray& array(const std::string& name) const;
  const std::map<std::string, NamedArray>& arrays() const { return arrays_; }

  // Typed accessors. Each verifies dtype and, when `expected_shape` is
  // non-empty, the exact shape; failures raise FormatError naming the array.
  std::vector<float> get_f32(const std::string& name, const std::vector<std::int64_t>& expected_shape = {}) const;
  std::vector<std::int32_t> get_i32(const std::string& name, const std::vector<std::int64_t>& expected_shape = {}) const;
  std::vector<double> get_f64(const std::string& name, const std::vector<std::int64_t>& expected_shape = {}) const;

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

  friend bool operator==(const Archive&, const Archive&) = default;

 private:
  const NamedArray& checked(const std::string& name, DType dtype, const std::vector<std::int64_t>& expected_shape) const;

  std::map<std::string, std::string> meta_;
  std::map<std::string, NamedArray> arrays_;
};

bool operator==(const NamedArray& a, const NamedArray& b);

/// Shape formatted as "[a, b, c]".
std::string shape_string(const std::vector<std::int64_t>& shape);

}  // namespace genb

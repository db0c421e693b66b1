// SPDX-License-Identifier: Apache-2.0
#include "genb/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "genb/error.hpp"

namespace genb {
namespace {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

constexpr char kMagic[8] = {'G', 'E', 'N', 'B', 'N', 'A', 'R', 'C'};
constexpr std::uint32_t kContainerVersion = 1;
// Guards against absurd allocations when reading corrupt headers.
constexpr std::uint64_t kMaxChunk = std::uint64_t{1} << 36;

template <typename T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw FormatError(what, std::string("truncated archive while reading ") + what);
  return value;
}

std::string read_string(std::istream& is, std::uint64_t len, const char* what) {
  if (len > kMaxChunk) throw FormatError(what, std::string("implausible length for ") + what);
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (!is) throw FormatError(what, std::string("truncated archive while reading ") + what);
  return s;
}

template <typename T>
void put_impl(std::map<std::string, NamedArray>& arrays, const std::string& name, DType dtype,
              std::vector<std::int64_t> shape, std::span<const T> data) {
  NamedArray arr;
  arr.dtype = dtype;
  arr.shape = std::move(shape);
  if (arr.element_count() != static_cast<std::int64_t>(data.size())) {
    throw ContractError("array '" + name + "': data size " + std::to_string(data.size()) +
                        " does not match shape " + shape_string(arr.shape));
  }
  arr.bytes.resize(data.size_bytes());
  if (!data.empty()) std::memcpy(arr.bytes.data(), data.data(), data.size_bytes());
  arrays[name] = std::move(arr);
}

template <typename T>
std::vector<T> copy_out(const NamedArray& arr) {
  std::vector<T> out(static_cast<std::size_t>(arr.element_count()));
  if (!out.empty()) std::memcpy(out.data(), arr.bytes.data(), arr.bytes.size());
  return out;
}

}  // namespace

const char* dtype_name(DType d) {
  switch (d) {
    case DType::kFloat32: return "float32";
    case DType::kInt32: return "int32";
    case DType::kFloat64: return "float64";
  }
  return "unknown";
}

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::kFloat32: return 4;
    case DType::kInt32: return 4;
    case DType::kFloat64: return 8;
  }
  return 0;
}

std::int64_t NamedArray::element_count() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

bool operator==(const NamedArray& a, const NamedArray& b) {
  return a.dtype == b.dtype && a.shape == b.shape && a.bytes == b.bytes;
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

void Archive::set_meta(const std::string& key, const std::string& value) {
  if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
    throw ContractError("metadata key/value may not contain '=' (key) or newlines: " + key);
  }
  meta_[key] = value;
}

bool Archive::has_meta(const std::string& key) const { return meta_.count(key) != 0; }

const std::string& Archive::meta(const std::string& key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) throw FormatError(key, "missing metadata key '" + key + "'");
  return it->second;
}

void Archive::put(const std::string& name, std::vector<std::int64_t> shape, std::span<const float> data) {
  put_impl(arrays_, name, DType::kFloat32, std::move(shape), data);
}
void Archive::put(const std::string& name, std::vector<std::int64_t> shape, std::span<const std::int32_t> data) {
  put_impl(arrays_, name, DType::kInt32, std::move(shape), data);
}
void Archive::put(const std::string& name, std::vector<std::int64_t> shape, std::span<const double> data) {
  put_impl(arrays_, name, DType::kFloat64, std::move(shape), data);
}

const NamedArray& Archive::array(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw FormatError(name, "missing array '" + name + "'");
  return it->second;
}

const NamedArray& Archive::checked(const std::string& name, DType dtype,
                                   const std::vector<std::int64_t>& expected_shape) const {
  const NamedArray& arr = array(name);
  if (arr.dtype != dtype) {
    throw FormatError(name, "array '" + name + "' has dtype " + dtype_name(arr.dtype) + ", expected " +
                                dtype_name(dtype));
  }
  if (!expected_shape.empty() && arr.shape != expected_shape) {
    throw FormatError(name, "array '" + name + "' has shape " + shape_string(arr.shape) + ", expected " +
                                shape_string(expected_shape));
  }
  return arr;
}

std::vector<float> Archive::get_f32(const std::string& name, const std::vector<std::int64_t>& shape) const {
  return copy_out<float>(checked(name, DType::kFloat32, shape));
}
std::vector<std::int32_t> Archive::get_i32(const std::string& name, const std::vector<std::int64_t>& shape) const {
  return copy_out<std::int32_t>(checked(name, DType::kInt32, shape));
}
std::vector<double> Archive::get_f64(const std::string& name, const std::vector<std::int64_t>& shape) const {
  return copy_out<double>(checked(name, DType::kFloat64, shape));
}

void Archive::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");

  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, kContainerVersion);

  std::string meta_text;
  for (const auto& [k, v] : meta_) meta_text += k + "=" + v + "\n";
  write_pod<std::uint64_t>(os, meta_text.size());
  os.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));

  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(arrays_.size()));
  for (const auto& [name, arr] : arrays_) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(arr.dtype));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(arr.shape.size()));
    for (auto d : arr.shape) write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(arr.bytes.data()), static_cast<std::streamsize>(arr.bytes.size()));
  }
  if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "' for reading");

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("magic", "'" + path.string() + "' is not a genb named-array archive");
  }
  auto version = read_pod<std::uint32_t>(is, "container_version");
  if (version != kContainerVersion) {
    throw FormatError("container_version", "unsupported container version " + std::to_string(version));
  }

  Archive ar;
  auto meta_len = read_pod<std::uint64_t>(is, "metadata");
  std::istringstream meta(read_string(is, meta_len, "metadata"));
  for (std::string line; std::getline(meta, line);) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("metadata", "malformed metadata line '" + line + "'");
    ar.meta_[line.substr(0, eq)] = line.substr(eq + 1);
  }

  auto count = read_pod<std::uint32_t>(is, "array_count");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name_len = read_pod<std::uint32_t>(is, "array name");
    std::string name = read_string(is, name_len, "array name");
    NamedArray arr;
    auto code = read_pod<std::uint8_t>(is, name.c_str());
    if (code < 1 || code > 3) throw FormatError(name, "array '" + name + "' has unknown dtype code");
    arr.dtype = static_cast<DType>(code);
    auto rank = read_pod<std::uint32_t>(is, name.c_str());
    if (rank > 16) throw FormatError(name, "array '" + name + "' has implausible rank");
    for (std::uint32_t r = 0; r < rank; ++r) {
      arr.shape.push_back(static_cast<std::int64_t>(read_pod<std::uint64_t>(is, name.c_str())));
    }
    std::uint64_t nbytes = static_cast<std::uint64_t>(arr.element_count()) * dtype_size(arr.dtype);
    if (nbytes > kMaxChunk) throw FormatError(name, "array '" + name + "' is implausibly large");
    arr.bytes.resize(nbytes);
    is.read(reinterpret_cast<char*>(arr.bytes.data()), static_cast<std::streamsize>(nbytes));
    if (!is) throw FormatError(name, "truncated data for array '" + name + "'");
    ar.arrays_[name] = std::move(arr);
  }
  return ar;
}

}  // namespace genb

#include "mgst/tensor_bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "mgst/errors.hpp"

namespace mgst {
namespace {

constexpr char kMagic[4] = {'M', 'G', 'S', 'T'};

std::string dims_str(const std::vector<std::uint32_t>& d) {
  return fmt::format("[{}]", fmt::join(d, ","));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* field) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(fmt::format("weights file truncated while reading {} at offset {}", field, pos_));
    }
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t Tensor::element_count() const noexcept {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void TensorBundle::set(const std::string& name, Tensor t) {
  if (t.element_count() != t.values.size()) {
    throw ShapeError(name, fmt::format("tensor '{}' dims {} imply {} values, got {}", name,
                                       dims_str(t.dims), t.element_count(), t.values.size()));
  }
  tensors_[name] = std::move(t);
}

const Tensor& TensorBundle::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError(fmt::format("missing weight tensor '{}'", name));
  return it->second;
}

const Tensor& TensorBundle::get(const std::string& name,
                                const std::vector<std::uint32_t>& expected) const {
  const Tensor& t = get(name);
  if (t.dims != expected) {
    throw ShapeError(name, fmt::format("tensor '{}' has shape {}, expected {}", name,
                                       dims_str(t.dims), dims_str(expected)));
  }
  return t;
}

std::vector<std::uint8_t> serialize(const TensorBundle& bundle) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, TensorBundle::kVersion);
  put_u32(out, static_cast<std::uint32_t>(bundle.size()));
  for (const auto& [name, t] : bundle.tensors()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

TensorBundle deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.str(4, "magic") != std::string(kMagic, 4)) throw FormatError("weights file: bad magic (expected MGST)");
  const auto version = in.u32("version");
  if (version != TensorBundle::kVersion) {
    throw FormatError(fmt::format("weights file: unsupported version {}", version));
  }
  const auto count = in.u32("tensor count");
  TensorBundle bundle;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.u32("name length");
    if (name_len > in.remaining()) throw FormatError(fmt::format("weights file: name length {} of tensor {} exceeds file", name_len, i));
    std::string name = in.str(name_len, "name");
    const auto rank = in.u32("rank");
    if (rank > 8) throw FormatError(fmt::format("weights file: tensor '{}' has implausible rank {}", name, rank));
    Tensor t;
    for (std::uint32_t r = 0; r < rank; ++r) t.dims.push_back(in.u32("dims"));
    const std::size_t n = t.element_count();
    if (n * 4 > in.remaining()) {
      throw FormatError(fmt::format("weights file truncated in payload of tensor '{}'", name));
    }
    t.values.resize(n);
    for (auto& v : t.values) v = in.f32("payload");
    if (bundle.contains(name)) throw FormatError(fmt::format("weights file: duplicate tensor '{}'", name));
    bundle.set(name, std::move(t));
  }
  if (!in.done()) throw FormatError("weights file: trailing bytes after last tensor");
  return bundle;
}

void save_bundle(const std::filesystem::path& path, const TensorBundle& bundle) {
  const auto bytes = serialize(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

TensorBundle load_bundle(
    const std::filesystem::path& path,
    const std::optional<std::map<std::string, std::vector<std::uint32_t>>>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  TensorBundle bundle = deserialize(bytes);
  if (expected) {
    for (const auto& [name, dims] : *expected) bundle.get(name, dims);
  }
  return bundle;
}

}  // namespace mgst

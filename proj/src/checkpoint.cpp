#include "ghostsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "ghostsr/errors.hpp"

namespace ghostsr {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'R', '1'};

template <typename U>
using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                                std::conditional_t<sizeof(U) == 4, std::uint32_t,
                                                   std::conditional_t<sizeof(U) == 2, std::uint16_t, std::uint8_t>>>;

class Writer {
 public:
  template <typename U>
  void scalar(U v) {
    const auto bits = std::bit_cast<Bits<U>>(v);
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  void string(const std::string& s) {
    scalar(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  template <typename U>
  void array(const std::vector<U>& v) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const char*>(v.data());
      out_.append(p, v.size() * sizeof(U));
    } else {
      for (U x : v) scalar(x);
    }
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U scalar() {
    need(sizeof(U));
    Bits<U> bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<Bits<U>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<U>(bits);
  }
  std::string string() {
    const auto n = scalar<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U>
  std::vector<U> array(std::uint64_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(U)) fail("tensor data runs past the end of the file");
    std::vector<U> v(n);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(U));
      pos_ += n * sizeof(U);
    } else {
      for (auto& x : v) x = scalar<U>();
    }
    return v;
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("checkpoint corrupt at byte " + std::to_string(pos_) + ": " + msg);
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("unexpected end of file");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t TensorEntry::numel() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void Checkpoint::put(const std::string& name, const Tensor<float>& t) {
  const Shape& s = t.shape();
  TensorEntry e;
  e.dims = {s.n, s.c, s.h, s.w};
  e.data = std::vector<float>(t.values().begin(), t.values().end());
  put(name, std::move(e));
}

void Checkpoint::put(const std::string& name, TensorEntry entry) {
  const std::uint64_t n = entry.numel();
  const std::size_t len = std::visit([](const auto& v) { return v.size(); }, entry.data);
  if (n != len) throw std::invalid_argument("tensor '" + name + "' data length disagrees with its dims");
  if (entry.dims.size() > 255) throw std::invalid_argument("tensor '" + name + "' has too many dimensions");
  entries_.insert_or_assign(name, std::move(entry));
}

const TensorEntry& Checkpoint::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

Tensor<float> Checkpoint::get_float(const std::string& name) const {
  const TensorEntry& e = entry(name);
  const auto* v = std::get_if<std::vector<float>>(&e.data);
  if (!v) throw ValidationError("checkpoint tensor '" + name + "' is not f32");
  if (e.dims.size() != 4) throw ValidationError("checkpoint tensor '" + name + "' is not rank 4");
  return Tensor<float>(Shape{e.dims[0], e.dims[1], e.dims[2], e.dims[3]}, *v);
}

std::string Checkpoint::serialize() const {
  Writer w;
  for (char c : kMagic) w.scalar(c);
  w.scalar(kVersion);
  w.scalar(meta.config_hash);
  w.scalar(meta.ratio);
  w.scalar(meta.d);
  w.scalar(meta.scale);
  w.string(meta.model);
  w.string(meta.config_text);
  w.scalar(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {
    w.string(name);
    w.scalar(static_cast<std::uint8_t>(e.dtype()));
    w.scalar(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) w.scalar(d);
    std::visit([&](const auto& v) { w.array(v); }, e.data);
  }
  return w.take();
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Reader r(bytes);
  for (char c : kMagic) {
    if (r.scalar<char>() != c) r.fail("bad magic (not a GSR1 checkpoint)");
  }
  const auto version = r.scalar<std::uint32_t>();
  if (version != kVersion) r.fail("unsupported format version " + std::to_string(version));
  Checkpoint ck;
  ck.meta.config_hash = r.scalar<std::uint64_t>();
  ck.meta.ratio = r.scalar<double>();
  ck.meta.d = r.scalar<std::int32_t>();
  ck.meta.scale = r.scalar<std::uint32_t>();
  ck.meta.model = r.string();
  ck.meta.config_text = r.string();
  const auto count = r.scalar<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string();
    const auto tag = r.scalar<std::uint8_t>();
    const auto rank = r.scalar<std::uint8_t>();
    TensorEntry e;
    for (std::uint8_t k = 0; k < rank; ++k) e.dims.push_back(r.scalar<std::uint64_t>());
    const std::uint64_t n = e.numel();
    switch (static_cast<DType>(tag)) {
      case DType::F32: e.data = r.array<float>(n); break;
      case DType::F64: e.data = r.array<double>(n); break;
      case DType::I32: e.data = r.array<std::int32_t>(n); break;
      case DType::I8: e.data = r.array<std::int8_t>(n); break;
      default: r.fail("unknown dtype tag " + std::to_string(tag) + " for tensor '" + name + "'");
    }
    if (ck.entries_.contains(name)) r.fail("duplicate tensor '" + name + "'");
    ck.entries_.emplace(std::move(name), std::move(e));
  }
  if (!r.done()) r.fail("trailing bytes after the last tensor");
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  const std::string bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw NotFound("checkpoint not found: " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("checkpoint not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace ghostsr

#include "sam/snapshot.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "sam/error.hpp"
#include "sam/memory_state.hpp"

namespace sam {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'M', 'C'};

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

template <typename T>
T read_le(std::span<const std::uint8_t> in, std::size_t& at) {
  if (at + sizeof(T) > in.size()) throw InputError("container: truncated data");
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, in.data() + at, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  at += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

void append_string(std::vector<std::uint8_t>& out, const std::string& s) {
  append_le<std::uint64_t>(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

std::string read_string(std::span<const std::uint8_t> in, std::size_t& at) {
  const auto n = read_le<std::uint64_t>(in, at);
  if (n > in.size() - at) throw InputError("container: truncated string");
  std::string s(reinterpret_cast<const char*>(in.data() + at), n);
  at += n;
  return s;
}

}  // namespace

void Container::put_doubles(const std::string& name, std::span<const double> v) {
  std::vector<std::uint8_t> b;
  b.reserve(8 + v.size() * 8);
  append_le<std::uint64_t>(b, v.size());
  for (double x : v) append_le(b, x);
  sections_[name] = std::move(b);
}

void Container::put_ints(const std::string& name, std::span<const std::int64_t> v) {
  std::vector<std::uint8_t> b;
  append_le<std::uint64_t>(b, v.size());
  for (auto x : v) append_le(b, x);
  sections_[name] = std::move(b);
}

void Container::put_string(const std::string& name, const std::string& s) {
  std::vector<std::uint8_t> b;
  append_string(b, s);
  sections_[name] = std::move(b);
}

void Container::put_matrix(const std::string& name, const Matrix& m) {
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  put_ints(name + ".shape", shape);
  put_doubles(name, std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

void Container::put_vector(const std::string& name, const Vector& v) {
  put_doubles(name, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

const std::vector<std::uint8_t>& Container::section(const std::string& name) const {
  auto it = sections_.find(name);
  if (it == sections_.end()) throw InputError("container: missing section '" + name + "'");
  return it->second;
}

std::vector<double> Container::get_doubles(const std::string& name) const {
  const auto& b = section(name);
  std::size_t at = 0;
  const auto n = read_le<std::uint64_t>(b, at);
  if (n != (b.size() - at) / 8 || (b.size() - at) % 8 != 0)
    throw InputError("container: section '" + name + "' has a bad length");
  std::vector<double> v(n);
  for (auto& x : v) x = read_le<double>(b, at);
  return v;
}

std::vector<std::int64_t> Container::get_ints(const std::string& name) const {
  const auto& b = section(name);
  std::size_t at = 0;
  const auto n = read_le<std::uint64_t>(b, at);
  if (n != (b.size() - at) / 8 || (b.size() - at) % 8 != 0)
    throw InputError("container: section '" + name + "' has a bad length");
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = read_le<std::int64_t>(b, at);
  return v;
}

std::int64_t Container::get_int(const std::string& name) const {
  const auto v = get_ints(name);
  if (v.size() != 1) throw InputError("container: section '" + name + "' is not a scalar");
  return v.front();
}

std::string Container::get_string(const std::string& name) const {
  const auto& b = section(name);
  std::size_t at = 0;
  return read_string(b, at);
}

Matrix Container::get_matrix(const std::string& name) const {
  const auto shape = get_ints(name + ".shape");
  const auto data = get_doubles(name);
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
      static_cast<std::size_t>(shape[0] * shape[1]) != data.size())
    throw InputError("container: matrix '" + name + "' has an inconsistent shape");
  Matrix m(shape[0], shape[1]);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

Vector Container::get_vector(const std::string& name) const {
  const auto data = get_doubles(name);
  return Eigen::Map<const Vector>(data.data(), static_cast<Index>(data.size()));
}

std::vector<std::uint8_t> Container::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  append_le(out, kVersion);
  append_string(out, kind_);
  append_le<std::uint64_t>(out, sections_.size());
  for (const auto& [name, data] : sections_) {
    append_string(out, name);
    append_le<std::uint64_t>(out, data.size());
    out.insert(out.end(), data.begin(), data.end());
  }
  return out;
}

Container Container::deserialize(std::span<const std::uint8_t> in) {
  if (in.size() < 8 || std::memcmp(in.data(), kMagic, 4) != 0)
    throw InputError("container: bad magic");
  std::size_t at = 4;
  const auto version = read_le<std::uint32_t>(in, at);
  if (version != kVersion)
    throw InputError("container: unsupported version " + std::to_string(version));
  Container c(read_string(in, at));
  const auto count = read_le<std::uint64_t>(in, at);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = read_string(in, at);
    const auto n = read_le<std::uint64_t>(in, at);
    if (n > in.size() - at) throw InputError("container: truncated section '" + name + "'");
    c.sections_[name].assign(in.begin() + static_cast<std::ptrdiff_t>(at),
                             in.begin() + static_cast<std::ptrdiff_t>(at + n));
    at += n;
  }
  if (at != in.size()) throw InputError("container: trailing bytes");
  return c;
}

void Container::save(const std::string& path) const {
  const auto bytes = serialize();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write '" + tmp + "'");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw InputError("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Container Container::load(const std::string& path, const std::string& expected_kind) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Container c = deserialize(bytes);
  if (!expected_kind.empty() && c.kind() != expected_kind)
    throw InputError("'" + path + "' holds a " + c.kind() + ", expected a " + expected_kind);
  return c;
}

Container memory_snapshot(const MemoryState& state) {
  require(state.journal().empty(), "memory_snapshot: journal must be empty");
  Container c("memory");
  const MemoryConfig& cfg = state.config();
  const std::int64_t shape[4] = {cfg.slots, cfg.word_size, cfg.reads, cfg.heads};
  c.put_ints("config", shape);
  c.put_matrix("words", state.words());
  c.put_vector("usage", state.discounted_usage());
  std::vector<std::int64_t> last(state.last_access().begin(), state.last_access().end());
  c.put_ints("last_access", last);
  const auto order = state.ring().order();
  std::vector<std::int64_t> ring(order.begin(), order.end());
  c.put_ints("ring", ring);
  const std::int64_t step = state.step();
  c.put_ints("step", std::span<const std::int64_t>(&step, 1));
  return c;
}

void restore_memory(MemoryState& state, const Container& c) {
  if (c.kind() != "memory") throw InputError("restore_memory: not a memory snapshot");
  const auto shape = c.get_ints("config");
  const MemoryConfig& cfg = state.config();
  if (shape.size() != 4 || shape[0] != cfg.slots || shape[1] != cfg.word_size ||
      shape[2] != cfg.reads || shape[3] != cfg.heads)
    throw InputError("restore_memory: snapshot shape does not match this memory");
  state.load(c.get_matrix("words"));
  const auto last = c.get_ints("last_access");
  const auto ring = c.get_ints("ring");
  state.load_usage(c.get_vector("usage"), std::vector<Index>(last.begin(), last.end()),
                   std::vector<Index>(ring.begin(), ring.end()), c.get_int("step"));
}

}  // namespace sam

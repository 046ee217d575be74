#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sam/dense.hpp"

namespace sam {

class MemoryState;

// Versioned binary container: magic, format version, a kind string and named
// sections. Numbers are stored little-endian.
class Container {
 public:
  static constexpr std::uint32_t kVersion = 1;

  Container() = default;
  explicit Container(std::string kind) : kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }
  bool has(const std::string& name) const { return sections_.count(name) != 0; }

  void put_doubles(const std::string& name, std::span<const double> v);
  void put_ints(const std::string& name, std::span<const std::int64_t> v);
  void put_string(const std::string& name, const std::string& s);
  void put_matrix(const std::string& name, const Matrix& m);
  void put_vector(const std::string& name, const Vector& v);

  std::vector<double> get_doubles(const std::string& name) const;
  std::vector<std::int64_t> get_ints(const std::string& name) const;
  std::string get_string(const std::string& name) const;
  Matrix get_matrix(const std::string& name) const;
  Vector get_vector(const std::string& name) const;
  std::int64_t get_int(const std::string& name) const;

  std::vector<std::uint8_t> serialize() const;
  static Container deserialize(std::span<const std::uint8_t> bytes);

  // Writes to a temporary file and renames it into place.
  void save(const std::string& path) const;
  static Container load(const std::string& path, const std::string& expected_kind);

 private:
  const std::vector<std::uint8_t>& section(const std::string& name) const;

  std::string kind_;
  std::map<std::string, std::vector<std::uint8_t>> sections_;
};

Container memory_snapshot(const MemoryState& state);
// The state must have the same configuration as the one snapshotted.
void restore_memory(MemoryState& state, const Container& c);

}  // namespace sam

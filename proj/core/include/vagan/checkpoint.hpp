#pragma once

#include <string>
#include <vector>

#include "vagan/layers.hpp"

#include "json.hpp"

namespace vagan::models {

// Versioned single-file container: magic, length-prefixed JSON header
// (array names/shapes/dtype/offsets plus a free-form meta object), then
// raw little-endian array data.
//
//   offset 0: "VGCKPT01"
//   offset 8: uint64 header length
//   offset 16: header JSON
//   then: packed arrays in header order
inline constexpr char kCheckpointMagic[] = "VGCKPT01";

struct ArrayEntry {
  std::string name;
  std::array<int, 4> shape;
  std::string dtype;  // "f4" or "f8"
  uint64_t offset = 0;
};

class CheckpointWriter {
 public:
  // dtype inferred from T at add time.
  template <typename T>
  void add(const std::string& name, const Tensor<T>& t);
  template <typename T>
  void add_table(const ParamTable<T>& table);
  template <typename T>
  void add_flat(const std::string& name, const std::vector<T>& values);

  nlohmann::json meta;  // arbitrary run metadata (kind, spec, iter, rng, ...)

  void write(const std::string& path) const;

 private:
  std::vector<ArrayEntry> entries_;
  std::vector<std::vector<uint8_t>> blobs_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path);

  const nlohmann::json& meta() const { return meta_; }
  bool has(const std::string& name) const;
  std::vector<std::string> names() const;

  template <typename T>
  Tensor<T> get(const std::string& name) const;
  template <typename T>
  std::vector<T> get_flat(const std::string& name) const;
  // Loads every table entry by name; throws on any missing array or
  // shape mismatch.
  template <typename T>
  void load_table(ParamTable<T>& table) const;

 private:
  const ArrayEntry& find(const std::string& name) const;
  std::vector<ArrayEntry> entries_;
  std::vector<uint8_t> data_;
  nlohmann::json meta_;
};

}  // namespace vagan::models

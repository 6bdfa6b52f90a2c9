#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vagan::npy {

// Minimal NPY v1.0 reader/writer for little-endian C-order arrays.
// Supported dtypes: <f4, <f8, <i8, |u1.

struct Array {
  std::string dtype;            // "<f4", "<f8", "<i8", "|u1"
  std::vector<size_t> shape;    // C-order
  std::vector<uint8_t> raw;     // packed data

  size_t elem_count() const;
  size_t elem_size() const;

  const float* as_f32() const { return reinterpret_cast<const float*>(raw.data()); }
  const double* as_f64() const { return reinterpret_cast<const double*>(raw.data()); }
  const int64_t* as_i64() const { return reinterpret_cast<const int64_t*>(raw.data()); }
};

void save(const std::string& path, const Array& a);
Array load(const std::string& path);

Array from_f32(const std::vector<float>& data, std::vector<size_t> shape);
Array from_f64(const std::vector<double>& data, std::vector<size_t> shape);
Array from_i64(const std::vector<int64_t>& data, std::vector<size_t> shape);

}  // namespace vagan::npy

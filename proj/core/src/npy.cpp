#include "vagan/npy.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vagan::npy {

namespace {

const char kMagic[] = "\x93NUMPY";

size_t dtype_size(const std::string& d) {
  if (d == "<f4") return 4;
  if (d == "<f8") return 8;
  if (d == "<i8") return 8;
  if (d == "|u1") return 1;
  throw std::runtime_error("npy: unsupported dtype " + d);
}

std::string shape_tuple(const std::vector<size_t>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    s += std::to_string(shape[i]);
    if (i + 1 < shape.size() || shape.size() == 1) s += ", ";
  }
  if (shape.size() > 1) s.resize(s.size() - 2);
  s += ")";
  return s;
}

}  // namespace

size_t Array::elem_size() const { return dtype_size(dtype); }

size_t Array::elem_count() const {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

void save(const std::string& path, const Array& a) {
  if (a.raw.size() != a.elem_count() * a.elem_size())
    throw std::runtime_error("npy: data size does not match shape");
  std::string header = "{'descr': '" + a.dtype + "', 'fortran_order': False, 'shape': " +
                       shape_tuple(a.shape) + ", }";
  // Pad so that magic(6) + version(2) + hlen(2) + header is a multiple of 64.
  size_t unpadded = 10 + header.size() + 1;
  size_t pad = (64 - unpadded % 64) % 64;
  header += std::string(pad, ' ');
  header += '\n';

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("npy: cannot open for write: " + path);
  f.write(kMagic, 6);
  f.put(1).put(0);
  uint16_t hlen = uint16_t(header.size());
  f.write(reinterpret_cast<const char*>(&hlen), 2);
  f.write(header.data(), std::streamsize(header.size()));
  f.write(reinterpret_cast<const char*>(a.raw.data()), std::streamsize(a.raw.size()));
  if (!f) throw std::runtime_error("npy: write failed: " + path);
}

Array load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("npy: cannot open: " + path);
  char magic[6];
  f.read(magic, 6);
  if (!f || std::memcmp(magic, kMagic, 6) != 0) throw std::runtime_error("npy: bad magic in " + path);
  char ver[2];
  f.read(ver, 2);
  if (ver[0] != 1) throw std::runtime_error("npy: unsupported version in " + path);
  uint16_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 2);
  std::string header(hlen, '\0');
  f.read(header.data(), hlen);
  if (!f) throw std::runtime_error("npy: truncated header in " + path);

  Array a;
  auto grab = [&](const std::string& key) -> std::string {
    size_t p = header.find(key);
    if (p == std::string::npos) throw std::runtime_error("npy: missing " + key + " in " + path);
    return header.substr(p + key.size());
  };
  {
    std::string rest = grab("'descr':");
    size_t q0 = rest.find('\'');
    size_t q1 = rest.find('\'', q0 + 1);
    a.dtype = rest.substr(q0 + 1, q1 - q0 - 1);
  }
  if (grab("'fortran_order':").find("True") < grab("'fortran_order':").find(',') )
    throw std::runtime_error("npy: fortran order not supported: " + path);
  {
    std::string rest = grab("'shape':");
    size_t p0 = rest.find('(');
    size_t p1 = rest.find(')');
    std::string tup = rest.substr(p0 + 1, p1 - p0 - 1);
    size_t pos = 0;
    while (pos < tup.size()) {
      size_t comma = tup.find(',', pos);
      std::string tok = tup.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      // trim
      size_t b = tok.find_first_not_of(" \t");
      if (b != std::string::npos) {
        size_t e = tok.find_last_not_of(" \t");
        tok = tok.substr(b, e - b + 1);
        if (!tok.empty()) a.shape.push_back(std::stoull(tok));
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  a.raw.resize(a.elem_count() * a.elem_size());
  f.read(reinterpret_cast<char*>(a.raw.data()), std::streamsize(a.raw.size()));
  if (!f) throw std::runtime_error("npy: truncated data in " + path);
  return a;
}

Array from_f32(const std::vector<float>& data, std::vector<size_t> shape) {
  Array a;
  a.dtype = "<f4";
  a.shape = std::move(shape);
  a.raw.resize(data.size() * 4);
  std::memcpy(a.raw.data(), data.data(), a.raw.size());
  return a;
}

Array from_f64(const std::vector<double>& data, std::vector<size_t> shape) {
  Array a;
  a.dtype = "<f8";
  a.shape = std::move(shape);
  a.raw.resize(data.size() * 8);
  std::memcpy(a.raw.data(), data.data(), a.raw.size());
  return a;
}

Array from_i64(const std::vector<int64_t>& data, std::vector<size_t> shape) {
  Array a;
  a.dtype = "<i8";
  a.shape = std::move(shape);
  a.raw.resize(data.size() * 8);
  std::memcpy(a.raw.data(), data.data(), a.raw.size());
  return a;
}

}  // namespace vagan::npy

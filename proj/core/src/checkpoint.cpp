#include "vagan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vagan::models {

namespace {

template <typename T>
const char* dtype_of();
template <>
const char* dtype_of<float>() { return "f4"; }
template <>
const char* dtype_of<double>() { return "f8"; }

}  // namespace

template <typename T>
void CheckpointWriter::add(const std::string& name, const Tensor<T>& t) {
  ArrayEntry e;
  e.name = name;
  e.shape = {t.n(), t.c(), t.h(), t.w()};
  e.dtype = dtype_of<T>();
  entries_.push_back(e);
  std::vector<uint8_t> blob(t.size() * sizeof(T));
  std::memcpy(blob.data(), t.data(), blob.size());
  blobs_.push_back(std::move(blob));
}

template <typename T>
void CheckpointWriter::add_flat(const std::string& name, const std::vector<T>& values) {
  ArrayEntry e;
  e.name = name;
  e.shape = {1, int(values.size()), 1, 1};
  e.dtype = dtype_of<T>();
  entries_.push_back(e);
  std::vector<uint8_t> blob(values.size() * sizeof(T));
  std::memcpy(blob.data(), values.data(), blob.size());
  blobs_.push_back(std::move(blob));
}

template <typename T>
void CheckpointWriter::add_table(const ParamTable<T>& table) {
  for (const auto& p : table.params) add(p.name, *p.value);
  for (const auto& b : table.buffers) add(b.name, *b.value);
}

void CheckpointWriter::write(const std::string& path) const {
  nlohmann::json header;
  header["version"] = 1;
  header["meta"] = meta;
  uint64_t offset = 0;
  nlohmann::json arrays = nlohmann::json::array();
  for (size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    arrays.push_back({{"name", e.name},
                      {"shape", e.shape},
                      {"dtype", e.dtype},
                      {"offset", offset}});
    offset += blobs_[i].size();
  }
  header["arrays"] = arrays;
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  f.write(kCheckpointMagic, 8);
  uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(hs.data(), std::streamsize(hs.size()));
  for (const auto& blob : blobs_)
    f.write(reinterpret_cast<const char*>(blob.data()), std::streamsize(blob.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

CheckpointReader::CheckpointReader(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  f.read(hs.data(), std::streamsize(hlen));
  if (!f) throw std::runtime_error("checkpoint: truncated header in " + path);
  nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("version").get<int>() != 1)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  meta_ = header.value("meta", nlohmann::json::object());
  for (const auto& a : header.at("arrays")) {
    ArrayEntry e;
    e.name = a.at("name").get<std::string>();
    auto sh = a.at("shape");
    for (int i = 0; i < 4; ++i) e.shape[size_t(i)] = sh.at(size_t(i)).get<int>();
    e.dtype = a.at("dtype").get<std::string>();
    e.offset = a.at("offset").get<uint64_t>();
    entries_.push_back(e);
  }
  data_.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

bool CheckpointReader::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::vector<std::string> CheckpointReader::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

const ArrayEntry& CheckpointReader::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw std::runtime_error("checkpoint: missing array: " + name);
}

template <typename T>
Tensor<T> CheckpointReader::get(const std::string& name) const {
  const auto& e = find(name);
  if (e.dtype != dtype_of<T>())
    throw std::runtime_error("checkpoint: dtype mismatch for " + name + " (" + e.dtype + ")");
  Tensor<T> t(e.shape[0], e.shape[1], e.shape[2], e.shape[3]);
  if (e.offset + t.size() * sizeof(T) > data_.size())
    throw std::runtime_error("checkpoint: array out of bounds: " + name);
  std::memcpy(t.data(), data_.data() + e.offset, t.size() * sizeof(T));
  return t;
}

template <typename T>
std::vector<T> CheckpointReader::get_flat(const std::string& name) const {
  Tensor<T> t = get<T>(name);
  return t.vec();
}

template <typename T>
void CheckpointReader::load_table(ParamTable<T>& table) const {
  for (auto& p : table.params) {
    Tensor<T> t = get<T>(p.name);
    if (!t.same_shape(*p.value))
      throw std::runtime_error("checkpoint: shape mismatch for " + p.name + ": file " +
                               t.shape_str() + " vs model " + p.value->shape_str());
    *p.value = std::move(t);
  }
  for (auto& b : table.buffers) {
    Tensor<T> t = get<T>(b.name);
    if (!t.same_shape(*b.value))
      throw std::runtime_error("checkpoint: shape mismatch for " + b.name);
    *b.value = std::move(t);
  }
}

#define VAGAN_INSTANTIATE_CKPT(T)                                                      \
  template void CheckpointWriter::add<T>(const std::string&, const Tensor<T>&);        \
  template void CheckpointWriter::add_flat<T>(const std::string&, const std::vector<T>&); \
  template void CheckpointWriter::add_table<T>(const ParamTable<T>&);                  \
  template Tensor<T> CheckpointReader::get<T>(const std::string&) const;               \
  template std::vector<T> CheckpointReader::get_flat<T>(const std::string&) const;     \
  template void CheckpointReader::load_table<T>(ParamTable<T>&) const;

VAGAN_INSTANTIATE_CKPT(float)
VAGAN_INSTANTIATE_CKPT(double)
#undef VAGAN_INSTANTIATE_CKPT

}  // namespace vagan::models

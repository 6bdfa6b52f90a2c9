#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace vagan {

// Incremental SHA-256, hex-encoded. Dataset digests hash the raw array
// bytes in a documented order; file digests hash whole files.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, size_t len);
  std::string hex();  // finalizes; further updates are invalid

 private:
  void* ctx_;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_file_hex(const std::string& path);

}  // namespace vagan

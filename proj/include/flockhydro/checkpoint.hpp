#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace flockhydro {

/// Binary array file: the 8-byte tag "FLKHYD01", a little-endian u64 header
/// length, a text header of `key = value` lines, then the row-major payload of
/// little-endian doubles.
struct Checkpoint {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::uint64_t config_digest = 0;
  /// Extra header fields; keys must not contain '=' or newlines.
  std::map<std::string, std::string> fields;

  std::size_t element_count() const;
};

void write_checkpoint(const Checkpoint& checkpoint, const std::string& path);

/// Throws FormatError("magic") or FormatError("payload length") on mismatch.
Checkpoint read_checkpoint(const std::string& path);

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace flockhydro

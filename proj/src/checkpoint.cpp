#include "flockhydro/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "flockhydro/errors.hpp"

namespace flockhydro {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'K', 'H', 'Y', 'D', '0', '1'};

void put_u64(std::string& out, std::uint64_t x) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((x >> (8 * b)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t x = 0;
  for (int b = 7; b >= 0; --b) x = (x << 8) | p[b];
  return x;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

}  // namespace

std::size_t Checkpoint::element_count() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return n;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_checkpoint(const Checkpoint& ck, const std::string& path) {
  if (ck.shape.empty()) throw FormatError("shape must have at least one axis");
  if (ck.element_count() != ck.data.size()) throw FormatError("data size does not match shape");
  std::ostringstream header;
  header << "shape =";
  for (std::size_t s : ck.shape) header << ' ' << s;
  header << "\ndtype = f64le\n";
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(ck.config_digest));
  header << "config_digest = " << digest << '\n';
  for (const auto& [k, v] : ck.fields) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw FormatError("header field '" + k + "' is not a single key = value line");
    header << k << " = " << v << '\n';
  }
  const std::string h = header.str();

  std::string bytes(kMagic, 8);
  put_u64(bytes, h.size());
  bytes += h;
  bytes.reserve(bytes.size() + 8 * ck.data.size());
  for (double x : ck.data) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(bytes, bits);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("write to " + path + " failed");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw FormatError("magic");
  if (bytes.size() < 16) throw FormatError("header length");
  const std::uint64_t hlen = get_u64(p + 8);
  if (hlen > bytes.size() - 16) throw FormatError("header length");

  Checkpoint ck;
  bool have_shape = false;
  std::istringstream header(bytes.substr(16, hlen));
  std::string line;
  while (std::getline(header, line)) {
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("header line without '='");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "shape") {
      std::istringstream ss(value);
      std::size_t s;
      while (ss >> s) ck.shape.push_back(s);
      if (ck.shape.empty()) throw FormatError("empty shape");
      have_shape = true;
    } else if (key == "dtype") {
      if (value != "f64le") throw FormatError("dtype " + value);
    } else if (key == "config_digest") {
      ck.config_digest = std::stoull(value, nullptr, 16);
    } else {
      ck.fields[key] = value;
    }
  }
  if (!have_shape) throw FormatError("missing shape");
  const std::size_t n = ck.element_count();
  if (bytes.size() - 16 - hlen != 8 * n) throw FormatError("payload length");
  ck.data.resize(n);
  const unsigned char* q = p + 16 + hlen;
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t bits = get_u64(q + 8 * k);
    std::memcpy(&ck.data[k], &bits, 8);
  }
  return ck;
}

}  // namespace flockhydro

#include "gridbench/assets.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

#include "embedded_assets.hpp"

namespace gridbench {

std::string_view asset(std::string_view name) {
  for (const auto& entry : detail::kEmbeddedAssets) {
    if (entry.name == name) return entry.content;
  }
  throw std::out_of_range("unknown asset '" + std::string(name) + "'");
}

std::vector<std::string> asset_names() {
  std::vector<std::string> out;
  for (const auto& entry : detail::kEmbeddedAssets) out.emplace_back(entry.name);
  return out;
}

std::vector<std::string> shipped_layout_names() { return {"easy", "medium", "hard"}; }

std::string_view shipped_layout_text(std::string_view name) {
  return asset("layouts/" + std::string(name) + ".txt");
}

std::shared_ptr<const GridMap> shipped_layout(std::string_view name) {
  return std::make_shared<const GridMap>(parse_map(shipped_layout_text(name), std::string(name)));
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0x0f];
  }
  return out;
}

}  // namespace gridbench

// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

namespace forge {

inline std::array<unsigned char, 32> sha256(std::string_view data) {
  std::array<unsigned char, 32> out{};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != out.size()) {
    throw std::runtime_error("sha256: OpenSSL digest failed");
  }
  return out;
}

inline std::string sha256_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  auto bytes = sha256(data);
  std::string hex;
  hex.reserve(64);
  for (unsigned char b : bytes) {
    hex.push_back(kHex[b >> 4]);
    hex.push_back(kHex[b & 0xf]);
  }
  return hex;
}

/// First eight digest bytes as a big-endian integer; used to derive
/// per-item RNG seeds from (run seed, item id).
inline std::uint64_t digest_u64(std::string_view data) {
  auto bytes = sha256(data);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

/// Content-derived identifier: a prefix plus the first 16 hex digits of the digest.
inline std::string content_id(std::string_view prefix, std::string_view content) {
  return std::string(prefix) + sha256_hex(content).substr(0, 16);
}

}  // namespace forge

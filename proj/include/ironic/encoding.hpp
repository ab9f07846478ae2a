#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ironic {

inline std::string to_hex(std::span<const unsigned char> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

// Content digest used for template pinning and completion cache keys.
inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("sha256: digest computation failed");
  }
  return to_hex(std::span<const unsigned char>(md.data(), len));
}

inline std::string sha256_hex(std::span<const unsigned char> data) {
  return sha256_hex(std::string_view(
      reinterpret_cast<const char*>(data.data()), data.size()));
}

namespace detail {
inline constexpr char kBase64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline int base64_index(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace detail

inline std::string base64_encode(std::span<const unsigned char> in) {
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= in.size(); i += 3) {
    std::uint32_t n = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
    out.push_back(detail::kBase64Alphabet[(n >> 18) & 63]);
    out.push_back(detail::kBase64Alphabet[(n >> 12) & 63]);
    out.push_back(detail::kBase64Alphabet[(n >> 6) & 63]);
    out.push_back(detail::kBase64Alphabet[n & 63]);
  }
  const std::size_t rest = in.size() - i;
  if (rest == 1) {
    std::uint32_t n = in[i] << 16;
    out.push_back(detail::kBase64Alphabet[(n >> 18) & 63]);
    out.push_back(detail::kBase64Alphabet[(n >> 12) & 63]);
    out.push_back('=');
    out.push_back('=');
  } else if (rest == 2) {
    std::uint32_t n = (in[i] << 16) | (in[i + 1] << 8);
    out.push_back(detail::kBase64Alphabet[(n >> 18) & 63]);
    out.push_back(detail::kBase64Alphabet[(n >> 12) & 63]);
    out.push_back(detail::kBase64Alphabet[(n >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline std::vector<unsigned char> base64_decode(std::string_view in) {
  if (in.size() % 4 != 0) {
    throw std::invalid_argument("base64: input length not a multiple of 4");
  }
  std::vector<unsigned char> out;
  out.reserve(in.size() / 4 * 3);
  for (std::size_t i = 0; i < in.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      char c = in[i + k];
      if (c == '=') {
        if (i + 4 != in.size() || k < 2) {
          throw std::invalid_argument("base64: misplaced padding");
        }
        v[k] = 0;
        ++pad;
      } else {
        if (pad > 0) throw std::invalid_argument("base64: data after padding");
        v[k] = detail::base64_index(c);
        if (v[k] < 0) throw std::invalid_argument("base64: invalid character");
      }
    }
    std::uint32_t n = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<unsigned char>((n >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<unsigned char>((n >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<unsigned char>(n & 0xff));
  }
  return out;
}

}  // namespace ironic

#include "onlay/ids.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace onlay {

std::string to_hex(std::span<const std::uint8_t> bytes) {
   static constexpr char digits[] = "0123456789abcdef";
   std::string out;
   out.reserve(bytes.size() * 2);
   for (auto b : bytes) {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0x0f]);
   }
   return out;
}

namespace {
int nibble(char c) {
   if (c >= '0' && c <= '9') return c - '0';
   if (c >= 'a' && c <= 'f') return c - 'a' + 10;
   if (c >= 'A' && c <= 'F') return c - 'A' + 10;
   return -1;
}
} // namespace

Bytes from_hex(std::string_view hex) {
   if (hex.size() % 2 != 0)
      throw std::invalid_argument("odd-length hex string");
   Bytes out(hex.size() / 2);
   for (std::size_t i = 0; i < out.size(); ++i) {
      int hi = nibble(hex[2 * i]);
      int lo = nibble(hex[2 * i + 1]);
      if (hi < 0 || lo < 0)
         throw std::invalid_argument("invalid hex digit");
      out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
   }
   return out;
}

Digest sha256(std::span<const std::uint8_t> data) {
   Digest out{};
   unsigned int len = 0;
   if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
      throw std::runtime_error("sha256 failed");
   return out;
}

EventId EventId::from_hex(std::string_view hex) {
   auto raw = onlay::from_hex(hex);
   if (raw.size() != 32)
      throw std::invalid_argument("event id must be 32 bytes");
   EventId id;
   std::copy(raw.begin(), raw.end(), id.bytes.begin());
   return id;
}

} // namespace onlay

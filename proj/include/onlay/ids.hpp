#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace onlay {

/// Participant index in [0, n). Ordered by index; that order is the
/// tie-break between processes in the total ordering of events.
struct NodeId {
   std::uint32_t value{0};

   auto operator<=>(const NodeId&) const = default;
};

using Bytes = std::vector<std::uint8_t>;

std::string to_hex(std::span<const std::uint8_t> bytes);
Bytes from_hex(std::string_view hex); // throws std::invalid_argument

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);

/// 32-byte digest of an event's canonical encoding. Equality is byte equality;
/// ordering is lexicographic on the bytes (the "hash" tie-break).
struct EventId {
   Digest bytes{};

   auto operator<=>(const EventId&) const = default;

   std::string hex() const { return to_hex(bytes); }
   std::string short_hex() const { return hex().substr(0, 8); }

   static EventId from_hex(std::string_view hex); // throws std::invalid_argument
};

} // namespace onlay

template <>
struct std::hash<onlay::EventId> {
   std::size_t operator()(const onlay::EventId& id) const noexcept {
      std::size_t h = 0;
      for (int i = 0; i < 8; ++i)
         h = (h << 8) | id.bytes[i];
      return h;
   }
};

template <>
struct std::hash<onlay::NodeId> {
   std::size_t operator()(const onlay::NodeId& n) const noexcept { return n.value; }
};

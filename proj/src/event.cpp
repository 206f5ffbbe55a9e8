#include "onlay/event.hpp"

#include <algorithm>

namespace onlay {

namespace {
void put_u64(Bytes& out, std::uint64_t v) {
   for (int shift = 56; shift >= 0; shift -= 8)
      out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_id(Bytes& out, const EventId& id) { out.insert(out.end(), id.bytes.begin(), id.bytes.end()); }
} // namespace

std::vector<EventId> EventBlock::refs() const {
   std::vector<EventId> out;
   out.reserve(other_refs.size() + 1);
   if (self_ref)
      out.push_back(*self_ref);
   out.insert(out.end(), other_refs.begin(), other_refs.end());
   return out;
}

std::string EventBlock::label() const { return std::to_string(creator.value) + ":" + std::to_string(seq); }

Bytes canonical_encoding(const EventBlock& e) {
   Bytes out;
   out.reserve(4 + 33 + 8 + 32 * e.other_refs.size() + 8 + 32 + 8);
   for (int shift = 24; shift >= 0; shift -= 8)
      out.push_back(static_cast<std::uint8_t>(e.creator.value >> shift));
   out.push_back(e.self_ref ? 1 : 0);
   if (e.self_ref)
      put_id(out, *e.self_ref);
   auto refs = e.other_refs;
   std::sort(refs.begin(), refs.end());
   put_u64(out, refs.size());
   for (const auto& r : refs)
      put_id(out, r);
   put_u64(out, e.lamport);
   auto payload_digest = sha256(e.payload);
   out.insert(out.end(), payload_digest.begin(), payload_digest.end());
   put_u64(out, e.seq);
   return out;
}

EventId compute_event_id(const EventBlock& e) { return EventId{sha256(canonical_encoding(e))}; }

EventBlock make_event(NodeId creator, std::optional<EventId> self_ref, std::vector<EventId> other_refs,
                      std::uint64_t lamport, Bytes payload, std::uint64_t seq) {
   EventBlock e;
   e.creator  = creator;
   e.self_ref = self_ref;
   std::sort(other_refs.begin(), other_refs.end());
   e.other_refs = std::move(other_refs);
   e.lamport    = lamport;
   e.payload    = std::move(payload);
   e.seq        = seq;
   e.id         = compute_event_id(e);
   return e;
}

} // namespace onlay

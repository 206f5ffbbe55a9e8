#include "onlay/dag_io.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace onlay {

std::string format_event_line(const EventBlock& e) {
   std::ostringstream out;
   out << "event " << e.id.hex() << " creator=" << e.creator.value << " self=" << (e.self_ref ? e.self_ref->hex() : "-")
       << " refs=";
   for (std::size_t i = 0; i < e.other_refs.size(); ++i)
      out << (i ? "," : "") << e.other_refs[i].hex();
   out << " lamport=" << e.lamport << " seq=" << e.seq << " payload=" << to_hex(e.payload);
   return out.str();
}

namespace {

std::uint64_t parse_uint(std::string_view s, std::size_t line_no, const char* field) {
   std::uint64_t v   = 0;
   auto [ptr, ec]    = std::from_chars(s.data(), s.data() + s.size(), v);
   if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw ParseError(line_no, std::string("bad integer in ") + field);
   return v;
}

EventId parse_id(std::string_view s, std::size_t line_no) {
   try {
      return EventId::from_hex(s);
   } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, std::string("bad event id: ") + e.what());
   }
}

} // namespace

EventBlock parse_event_line(const std::string& line, std::size_t line_no, bool verify_id) {
   std::istringstream in(line);
   std::string        tag, id;
   in >> tag >> id;
   if (tag != "event" || id.empty())
      throw ParseError(line_no, "expected `event <hex-id>`");
   std::map<std::string, std::string> kv;
   std::string                        tok;
   while (in >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
         throw ParseError(line_no, "expected key=value, got `" + tok + "`");
      if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second)
         throw ParseError(line_no, "duplicate field " + tok.substr(0, eq));
   }
   for (const char* key : {"creator", "self", "refs", "lamport", "seq", "payload"})
      if (!kv.contains(key))
         throw ParseError(line_no, std::string("missing field ") + key);
   if (kv.size() != 6)
      throw ParseError(line_no, "unexpected field");

   EventBlock e;
   e.id      = parse_id(id, line_no);
   auto c    = parse_uint(kv["creator"], line_no, "creator");
   if (c > UINT32_MAX)
      throw ParseError(line_no, "creator out of range");
   e.creator = NodeId{static_cast<std::uint32_t>(c)};
   if (kv["self"] != "-")
      e.self_ref = parse_id(kv["self"], line_no);
   std::string_view refs = kv["refs"];
   while (!refs.empty()) {
      auto comma = refs.find(',');
      e.other_refs.push_back(parse_id(refs.substr(0, comma), line_no));
      if (comma == std::string_view::npos)
         break;
      refs.remove_prefix(comma + 1);
   }
   if (!std::is_sorted(e.other_refs.begin(), e.other_refs.end()))
      throw ParseError(line_no, "refs not in canonical (sorted) order");
   e.lamport = parse_uint(kv["lamport"], line_no, "lamport");
   e.seq     = parse_uint(kv["seq"], line_no, "seq");
   try {
      e.payload = from_hex(kv["payload"]);
   } catch (const std::invalid_argument& ex) {
      throw ParseError(line_no, std::string("bad payload: ") + ex.what());
   }
   if (verify_id && compute_event_id(e) != e.id)
      throw ParseError(line_no, "id does not match the record digest");
   return e;
}

void write_dag(std::ostream& out, const OperaChain& chain) {
   for (const auto& e : chain.events())
      out << format_event_line(e) << '\n';
}

OperaChain read_dag_lines(const std::vector<std::string>& lines, std::size_t first_line_no, bool verify_id) {
   OperaChain chain;
   for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto& line    = lines[i];
      std::size_t line_no = first_line_no + i;
      if (line.empty() || line[0] == '#')
         continue;
      auto e = parse_event_line(line, line_no, verify_id);
      try {
         chain.insert(std::move(e));
      } catch (const ChainError& ex) {
         throw ParseError(line_no, ex.what());
      }
   }
   return chain;
}

OperaChain read_dag(std::istream& in, bool verify_id) {
   std::vector<std::string> lines;
   for (std::string line; std::getline(in, line);)
      lines.push_back(line);
   return read_dag_lines(lines, 1, verify_id);
}

std::string layering_dot(const OperaChain& chain, const Layering& layering) {
   std::ostringstream out;
   out << "digraph hopera {\n  rankdir=BT;\n  node [shape=box];\n";
   for (std::uint32_t k = 1; k <= layering.height(); ++k) {
      out << "  { rank=same;";
      for (Vertex v : layering.layers[k - 1])
         out << " e" << v << ";";
      out << " }\n";
   }
   for (Index i = 0; i < chain.size(); ++i)
      out << "  e" << i << " [label=\"" << chain.event(i).label() << "@" << layering.layer_of(i) << "\"];\n";
   for (Index i = 0; i < chain.size(); ++i)
      for (Index p : chain.parents(i))
         out << "  e" << i << " -> e" << p << ";\n";
   out << "}\n";
   return out.str();
}

std::string root_graph_dot(const OperaChain& chain, const Layering& layering, const RootGraph& rg,
                           const std::vector<std::uint32_t>& phi_R) {
   static const char* palette[] = {"lightblue", "lightpink", "palegreen", "khaki", "plum", "lightsalmon"};
   std::ostringstream out;
   out << "digraph roots {\n  rankdir=BT;\n  node [shape=ellipse, style=filled];\n";
   for (Index r : rg.roots) {
      auto f = phi_R.at(r);
      out << "  r" << r << " [label=\"" << chain.event(r).label() << "@" << layering.layer_of(r) << " F" << f
          << "\", fillcolor=" << palette[(f - 1) % 6] << "];\n";
   }
   for (auto [u, v] : rg.edges)
      out << "  r" << u << " -> r" << v << ";\n";
   out << "}\n";
   return out.str();
}

} // namespace onlay

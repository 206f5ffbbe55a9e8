#pragma once

#include "onlay/chain.hpp"
#include "onlay/layering.hpp"
#include "onlay/root_frame.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace onlay {

class ParseError : public std::runtime_error {
public:
   ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
   std::size_t line() const { return line_; }

private:
   std::size_t line_;
};

/// `event <hex-id> creator=<int> self=<hex-id|-> refs=<comma-hex> lamport=<int> seq=<int> payload=<hex>`
std::string format_event_line(const EventBlock& e);
EventBlock  parse_event_line(const std::string& line, std::size_t line_no, bool verify_id = true);

/// Events in insertion (topological) order, one record per line.
void write_dag(std::ostream& out, const OperaChain& chain);

/// Reads records until EOF; blank lines and `#` comments are skipped. With
/// `verify_id` each id must equal the digest of the record. Validity failures
/// are reported as ParseError carrying the line number.
OperaChain read_dag(std::istream& in, bool verify_id = true);
OperaChain read_dag_lines(const std::vector<std::string>& lines, std::size_t first_line_no, bool verify_id);

/// Vertices labelled `creator:seq@layer`, edges child -> parent, one rank per layer.
std::string layering_dot(const OperaChain& chain, const Layering& layering);

/// Roots only, filled by frame, E_R edges.
std::string root_graph_dot(const OperaChain& chain, const Layering& layering, const RootGraph& rg,
                           const std::vector<std::uint32_t>& phi_R);

} // namespace onlay

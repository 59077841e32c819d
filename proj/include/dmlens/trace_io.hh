#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dmlens/trace.hh"

namespace dmlens {

inline constexpr int kTraceFormatVersion = 1;

/* Raised by parse_trace. line() is the 1-based input line the error refers
 * to, or 0 when the error concerns the trace as a whole.
 */
class ParseError : public Error {
public:
  ParseError(ErrorCode code, std::size_t line, const std::string &what)
      : Error(code, what), line_(line) {}

  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

// Reads an NDJSON trace. Events are re-sorted by (start_ns, seq); the result
// always passes validate().
Trace parse_trace(std::istream &in);
Trace parse_trace(std::string_view text);
Trace read_trace_file(const std::string &path);

// Canonical NDJSON form. Throws Error(InvalidTrace) if validate() fails.
void serialize_trace(const Trace &trace, std::ostream &out);
std::string serialize_trace(const Trace &trace);
void write_trace_file(const Trace &trace, const std::string &path);

} // namespace dmlens

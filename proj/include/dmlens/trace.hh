#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dmlens {

// Device slot index. The host occupies one slot, named by Trace::host_device.
using DeviceNum = std::uint32_t;

enum class EventKind : std::uint8_t { Transfer, Alloc, Delete, Kernel };

std::string_view kind_name(EventKind kind);
std::optional<EventKind> kind_from_name(std::string_view name);

struct CodeLocation {
  std::uint64_t codeptr = 0; // raw return address, 0 = unknown
  std::optional<std::string> file;
  std::optional<std::uint32_t> line;

  bool operator==(const CodeLocation &) const = default;
};

/* One target-related runtime event. Field meaning depends on kind:
 *
 *   Transfer  src/dst device and buffer addresses, payload bytes, content hash
 *   Alloc     src_addr = host variable, dst_addr = device address, bytes = size
 *   Delete    dst_addr = device address being freed
 *   Kernel    dst_device = executing device (src_device mirrors it)
 */
struct TraceEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Transfer;
  std::uint64_t start_ns = 0;
  std::uint64_t end_ns = 0;
  DeviceNum src_device = 0;
  DeviceNum dst_device = 0;
  std::uint64_t src_addr = 0;
  std::uint64_t dst_addr = 0;
  std::uint64_t bytes = 0;
  std::uint64_t hash = 0; // 0 = no hash
  CodeLocation loc;

  std::uint64_t duration_ns() const { return end_ns - start_ns; }

  bool operator==(const TraceEvent &) const = default;
};

// Chronological order used throughout: (start_ns, seq).
inline bool chrono_less(const TraceEvent &a, const TraceEvent &b) {
  if (a.start_ns != b.start_ns) {
    return a.start_ns < b.start_ns;
  }
  return a.seq < b.seq;
}

struct Trace {
  int version = 1;
  std::uint32_t num_devices_total = 1;
  DeviceNum host_device = 0;
  std::optional<std::uint64_t> wall_time_ns;
  std::vector<TraceEvent> events;

  // Header wall time when present, otherwise max end_ns - min start_ns.
  std::uint64_t wall_time() const;

  bool operator==(const Trace &) const = default;
};

struct Violation {
  std::optional<std::uint64_t> seq;
  std::string message;

  bool operator==(const Violation &) const = default;
};

std::vector<Violation> validate(const Trace &trace);

std::string to_string(const Violation &violation);

enum class ErrorCode {
  MalformedRecord,
  MissingHeader,
  UnsupportedVersion,
  InvariantViolation,
  InvalidTrace,
  EmptyPayload,
  DeviceOutOfRange,
  FindingsTraceMismatch,
  InvalidSpec,
  Io,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

} // namespace dmlens

#include "dmlens/trace.hh"

#include <algorithm>
#include <limits>
#include <unordered_set>

namespace dmlens {

std::string_view kind_name(EventKind kind) {
  switch (kind) {
  case EventKind::Transfer:
    return "transfer";
  case EventKind::Alloc:
    return "alloc";
  case EventKind::Delete:
    return "delete";
  case EventKind::Kernel:
    return "kernel";
  }
  return "unknown";
}

std::optional<EventKind> kind_from_name(std::string_view name) {
  if (name == "transfer") {
    return EventKind::Transfer;
  }
  if (name == "alloc") {
    return EventKind::Alloc;
  }
  if (name == "delete") {
    return EventKind::Delete;
  }
  if (name == "kernel") {
    return EventKind::Kernel;
  }
  return std::nullopt;
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::MalformedRecord:
    return "MalformedRecord";
  case ErrorCode::MissingHeader:
    return "MissingHeader";
  case ErrorCode::UnsupportedVersion:
    return "UnsupportedVersion";
  case ErrorCode::InvariantViolation:
    return "InvariantViolation";
  case ErrorCode::InvalidTrace:
    return "InvalidTrace";
  case ErrorCode::EmptyPayload:
    return "EmptyPayload";
  case ErrorCode::DeviceOutOfRange:
    return "DeviceOutOfRange";
  case ErrorCode::FindingsTraceMismatch:
    return "FindingsTraceMismatch";
  case ErrorCode::InvalidSpec:
    return "InvalidSpec";
  case ErrorCode::Io:
    return "Io";
  }
  return "Unknown";
}

std::uint64_t Trace::wall_time() const {
  if (wall_time_ns) {
    return *wall_time_ns;
  }
  if (events.empty()) {
    return 0;
  }
  std::uint64_t first = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t last = 0;
  for (const TraceEvent &e : events) {
    first = std::min(first, e.start_ns);
    last = std::max(last, e.end_ns);
  }
  return last >= first ? last - first : 0;
}

std::string to_string(const Violation &violation) {
  if (violation.seq) {
    return "seq " + std::to_string(*violation.seq) + ": " + violation.message;
  }
  return violation.message;
}

std::vector<Violation> validate(const Trace &trace) {
  std::vector<Violation> out;
  auto report = [&out](std::optional<std::uint64_t> seq, std::string msg) {
    out.push_back(Violation{seq, std::move(msg)});
  };

  if (trace.num_devices_total == 0) {
    report(std::nullopt, "num_devices_total must be positive");
  }
  if (trace.host_device >= trace.num_devices_total) {
    report(std::nullopt, "host_device " + std::to_string(trace.host_device) +
                             " out of range");
  }

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(trace.events.size());
  const TraceEvent *prev = nullptr;
  for (const TraceEvent &e : trace.events) {
    if (!seen.insert(e.seq).second) {
      report(e.seq, "duplicate seq");
    }
    if (prev != nullptr && !chrono_less(*prev, e)) {
      report(e.seq, "events not sorted by (start_ns, seq)");
    }
    prev = &e;

    if (e.start_ns > e.end_ns) {
      report(e.seq, "interval inverted");
    }
    if (e.src_device >= trace.num_devices_total) {
      report(e.seq, "src_device " + std::to_string(e.src_device) +
                        " out of range");
    }
    if (e.dst_device >= trace.num_devices_total) {
      report(e.seq, "dst_device " + std::to_string(e.dst_device) +
                        " out of range");
    }
    if (e.loc.file && !e.loc.line) {
      report(e.seq, "location has file but no line");
    }
    if (e.loc.line && *e.loc.line == 0) {
      report(e.seq, "line must be positive");
    }

    switch (e.kind) {
    case EventKind::Transfer:
      if (e.bytes > 0 && e.hash == 0) {
        report(e.seq, "non-empty transfer without hash");
      }
      break;
    case EventKind::Alloc:
      if (e.bytes == 0) {
        report(e.seq, "allocation of zero bytes");
      }
      if (e.dst_addr == 0) {
        report(e.seq, "allocation without device address");
      }
      break;
    case EventKind::Delete:
      if (e.dst_addr == 0) {
        report(e.seq, "delete without device address");
      }
      break;
    case EventKind::Kernel:
      break;
    }
  }
  return out;
}

} // namespace dmlens

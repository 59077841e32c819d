#include "dmlens/trace_io.hh"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>

#include <json.hpp>
#include <rapidjson/error/en.h>
#include <rapidjson/reader.h>

namespace dmlens {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(std::size_t line, const std::string &reason) {
  throw ParseError(ErrorCode::MalformedRecord, line,
                   "line " + std::to_string(line) + ": " + reason);
}

// One flat JSON object. Nested values are recorded only as Compound.
struct Field {
  enum class Type { Unsigned, Negative, Float, String, Bool, Null, Compound };
  std::string key;
  Type type = Type::Null;
  std::uint64_t u = 0;
  std::string s;
};

enum Key {
  kSeq, kKind, kT0, kT1, kSrcDev, kDstDev, kSrcAddr, kDstAddr, kBytes, kHash,
  kCodeptr, kFile, kLine, kDmlens, kNumDevices, kHostDevice, kWallTime,
  kKeyCount
};

constexpr std::string_view kKeyNames[kKeyCount] = {
    "seq",      "kind",  "t0",    "t1",     "src_dev",     "dst_dev",
    "src_addr", "dst_addr", "bytes", "hash", "codeptr",    "file",
    "line",     "dmlens", "num_devices", "host_device", "wall_time_ns"};

struct Record {
  std::vector<Field> fields;
  std::array<int, kKeyCount> slot{};

  void clear() {
    fields.clear();
    slot.fill(-1);
  }

  void add_key(std::string_view k) {
    for (int id = 0; id < kKeyCount; ++id) {
      if (kKeyNames[id] == k) {
        // Last occurrence wins, as with a JSON DOM.
        slot[id] = static_cast<int>(fields.size());
        break;
      }
    }
    fields.emplace_back().key.assign(k);
  }

  const Field *find(Key k) const {
    return slot[k] < 0 ? nullptr : &fields[slot[k]];
  }
};

class RecordHandler {
public:
  explicit RecordHandler(Record &rec) : rec_(rec) {}

  bool Null() { return scalar(Field::Type::Null); }
  bool Bool(bool) { return scalar(Field::Type::Bool); }
  bool Int(int v) { return v >= 0 ? Uint64(static_cast<std::uint64_t>(v)) : negative(); }
  bool Uint(unsigned v) { return Uint64(v); }
  bool Int64(std::int64_t v) {
    return v >= 0 ? Uint64(static_cast<std::uint64_t>(v)) : negative();
  }
  bool Uint64(std::uint64_t v) {
    if (depth_ == 1) {
      rec_.fields.back().u = v;
    }
    return scalar(Field::Type::Unsigned);
  }
  bool Double(double) { return scalar(Field::Type::Float); }
  bool RawNumber(const char *, rapidjson::SizeType, bool) {
    return scalar(Field::Type::Float);
  }
  bool String(const char *str, rapidjson::SizeType len, bool) {
    if (depth_ == 1) {
      rec_.fields.back().s.assign(str, len);
    }
    return scalar(Field::Type::String);
  }
  bool StartObject() { return open(); }
  bool Key(const char *str, rapidjson::SizeType len, bool) {
    if (depth_ == 1) {
      rec_.add_key(std::string_view(str, len));
    }
    return true;
  }
  bool EndObject(rapidjson::SizeType) {
    --depth_;
    return true;
  }
  bool StartArray() {
    if (depth_ == 0) {
      not_object_ = true;
      return false;
    }
    return open();
  }
  bool EndArray(rapidjson::SizeType) {
    --depth_;
    return true;
  }

  bool not_object() const { return not_object_; }

private:
  bool negative() { return scalar(Field::Type::Negative); }
  bool open() {
    if (depth_ == 1) {
      rec_.fields.back().type = Field::Type::Compound;
    }
    ++depth_;
    return true;
  }
  bool scalar(Field::Type t) {
    if (depth_ == 0) {
      not_object_ = true;
      return false;
    }
    if (depth_ == 1) {
      rec_.fields.back().type = t;
    }
    return true;
  }

  Record &rec_;
  int depth_ = 0;
  bool not_object_ = false;
};

std::uint64_t require_uint(const Record &rec, Key k, std::size_t line,
                           std::uint64_t max =
                               std::numeric_limits<std::uint64_t>::max()) {
  const Field *f = rec.find(k);
  if (f == nullptr) {
    malformed(line, std::string("missing field \"") + std::string(kKeyNames[k]) + "\"");
  }
  if (f->type == Field::Type::Negative) {
    malformed(line, std::string("field \"") + std::string(kKeyNames[k]) + "\" is negative");
  }
  if (f->type != Field::Type::Unsigned) {
    malformed(line, std::string("field \"") + std::string(kKeyNames[k]) +
                        "\" must be a non-negative integer");
  }
  if (f->u > max) {
    malformed(line, std::string("field \"") + std::string(kKeyNames[k]) + "\" out of range");
  }
  return f->u;
}

void parse_record(const std::string &text, std::size_t line, Record &rec) {
  rec.clear();
  if (text.find('\0') != std::string::npos) {
    malformed(line, "invalid JSON: embedded NUL byte");
  }
  RecordHandler handler(rec);
  rapidjson::Reader reader;
  rapidjson::StringStream in(text.c_str());
  const rapidjson::ParseResult ok =
      reader.Parse<rapidjson::kParseValidateEncodingFlag>(in, handler);
  if (handler.not_object()) {
    malformed(line, "record is not a JSON object");
  }
  if (!ok) {
    malformed(line, "invalid JSON at column " + std::to_string(ok.Offset() + 1) +
                        ": " + rapidjson::GetParseError_En(ok.Code()));
  }
}

void read_header(const Record &rec, std::size_t line, Trace &trace) {
  const Field *tag = rec.find(kDmlens);
  if (tag == nullptr) {
    throw ParseError(ErrorCode::MissingHeader, line,
                     "line " + std::to_string(line) +
                         ": first record is not a trace header");
  }
  if (tag->type != Field::Type::Unsigned ||
      tag->u != static_cast<std::uint64_t>(kTraceFormatVersion)) {
    const std::string shown =
        tag->type == Field::Type::Unsigned ? std::to_string(tag->u) : "(non-integer)";
    throw ParseError(ErrorCode::UnsupportedVersion, line,
                     "line " + std::to_string(line) +
                         ": unsupported trace format version " + shown);
  }
  trace.version = kTraceFormatVersion;
  const auto max_dev = std::numeric_limits<std::uint32_t>::max();
  trace.num_devices_total =
      static_cast<std::uint32_t>(require_uint(rec, kNumDevices, line, max_dev));
  if (trace.num_devices_total == 0) {
    malformed(line, "num_devices must be positive");
  }
  trace.host_device =
      static_cast<DeviceNum>(require_uint(rec, kHostDevice, line, max_dev));
  if (rec.find(kWallTime) != nullptr) {
    trace.wall_time_ns = require_uint(rec, kWallTime, line);
  }
}

TraceEvent read_event(const Record &rec, std::size_t line) {
  TraceEvent e;
  const auto max_dev = std::numeric_limits<std::uint32_t>::max();
  e.seq = require_uint(rec, kSeq, line);

  const Field *kind = rec.find(kKind);
  if (kind == nullptr) {
    malformed(line, "missing field \"kind\"");
  }
  if (kind->type != Field::Type::String) {
    malformed(line, "field \"kind\" must be a string");
  }
  const auto parsed_kind = kind_from_name(kind->s);
  if (!parsed_kind) {
    malformed(line, "unknown event kind " + json(kind->s).dump());
  }
  e.kind = *parsed_kind;

  e.start_ns = require_uint(rec, kT0, line);
  e.end_ns = require_uint(rec, kT1, line);
  if (e.end_ns < e.start_ns) {
    malformed(line, "interval inverted (t1 < t0) on seq " +
                        std::to_string(e.seq));
  }
  e.src_device = static_cast<DeviceNum>(require_uint(rec, kSrcDev, line, max_dev));
  e.dst_device = static_cast<DeviceNum>(require_uint(rec, kDstDev, line, max_dev));
  e.src_addr = require_uint(rec, kSrcAddr, line);
  e.dst_addr = require_uint(rec, kDstAddr, line);
  e.bytes = require_uint(rec, kBytes, line);
  e.hash = require_uint(rec, kHash, line);
  e.loc.codeptr = require_uint(rec, kCodeptr, line);

  if (const Field *file = rec.find(kFile); file != nullptr) {
    if (file->type != Field::Type::String) {
      malformed(line, "field \"file\" must be a string");
    }
    e.loc.file = file->s;
  }
  if (rec.find(kLine) != nullptr) {
    const std::uint64_t l = require_uint(rec, kLine, line, max_dev);
    if (l == 0) {
      malformed(line, "field \"line\" must be positive");
    }
    e.loc.line = static_cast<std::uint32_t>(l);
  }
  return e;
}

void write_event(const TraceEvent &e, std::ostream &out) {
  out << "{\"seq\":" << e.seq << ",\"kind\":\"" << kind_name(e.kind)
      << "\",\"t0\":" << e.start_ns << ",\"t1\":" << e.end_ns
      << ",\"src_dev\":" << e.src_device << ",\"dst_dev\":" << e.dst_device
      << ",\"src_addr\":" << e.src_addr << ",\"dst_addr\":" << e.dst_addr
      << ",\"bytes\":" << e.bytes << ",\"hash\":" << e.hash
      << ",\"codeptr\":" << e.loc.codeptr;
  if (e.loc.file) {
    out << ",\"file\":" << json(*e.loc.file).dump();
  }
  if (e.loc.line) {
    out << ",\"line\":" << *e.loc.line;
  }
  out << "}\n";
}

} // namespace

Trace parse_trace(std::istream &in) {
  Trace trace;
  bool have_header = false;
  std::string text;
  Record rec;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') {
      text.pop_back();
    }
    if (text.empty() || text.front() == '#') {
      continue;
    }
    parse_record(text, line, rec);
    if (!have_header) {
      read_header(rec, line, trace);
      have_header = true;
      continue;
    }
    if (rec.find(kDmlens) != nullptr) {
      malformed(line, "unexpected second header record");
    }
    trace.events.push_back(read_event(rec, line));
  }
  if (!have_header) {
    throw ParseError(ErrorCode::MissingHeader, 0, "trace has no header record");
  }

  std::sort(trace.events.begin(), trace.events.end(), chrono_less);

  const std::vector<Violation> violations = validate(trace);
  if (!violations.empty()) {
    std::string msg = "trace violates " + std::to_string(violations.size()) +
                      " invariant(s):";
    for (const Violation &v : violations) {
      msg += "\n  " + to_string(v);
    }
    throw ParseError(ErrorCode::InvariantViolation, 0, msg);
  }
  return trace;
}

Trace parse_trace(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trace(in);
}

Trace read_trace_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open trace file '" + path + "'");
  }
  return parse_trace(in);
}

void serialize_trace(const Trace &trace, std::ostream &out) {
  const std::vector<Violation> violations = validate(trace);
  if (!violations.empty()) {
    throw Error(ErrorCode::InvalidTrace,
                "cannot serialize invalid trace: " + to_string(violations.front()));
  }
  out << "{\"dmlens\":" << kTraceFormatVersion
      << ",\"num_devices\":" << trace.num_devices_total
      << ",\"host_device\":" << trace.host_device;
  if (trace.wall_time_ns) {
    out << ",\"wall_time_ns\":" << *trace.wall_time_ns;
  }
  out << "}\n";
  for (const TraceEvent &e : trace.events) {
    write_event(e, out);
  }
}

std::string serialize_trace(const Trace &trace) {
  std::ostringstream out;
  serialize_trace(trace, out);
  return out.str();
}

void write_trace_file(const Trace &trace, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write trace file '" + path + "'");
  }
  serialize_trace(trace, out);
  if (!out) {
    throw Error(ErrorCode::Io, "write failed for '" + path + "'");
  }
}

} // namespace dmlens

#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "dmlens/trace.hh"

namespace dmlens::test {

inline TraceEvent transfer(std::uint64_t seq, std::uint64_t t0, std::uint64_t t1,
                           DeviceNum src, DeviceNum dst, std::uint64_t hash,
                           std::uint64_t src_addr = 0x1000,
                           std::uint64_t bytes = 64) {
  TraceEvent e;
  e.seq = seq;
  e.kind = EventKind::Transfer;
  e.start_ns = t0;
  e.end_ns = t1;
  e.src_device = src;
  e.dst_device = dst;
  e.src_addr = src_addr;
  e.dst_addr = 0x9000;
  e.bytes = hash == 0 ? 0 : bytes;
  e.hash = hash;
  return e;
}

inline TraceEvent alloc(std::uint64_t seq, std::uint64_t t0, std::uint64_t t1,
                        DeviceNum dev, std::uint64_t dst_addr,
                        std::uint64_t host_addr = 0x1000,
                        std::uint64_t bytes = 64) {
  TraceEvent e;
  e.seq = seq;
  e.kind = EventKind::Alloc;
  e.start_ns = t0;
  e.end_ns = t1;
  e.dst_device = dev;
  e.src_addr = host_addr;
  e.dst_addr = dst_addr;
  e.bytes = bytes;
  return e;
}

inline TraceEvent release(std::uint64_t seq, std::uint64_t t0, std::uint64_t t1,
                          DeviceNum dev, std::uint64_t dst_addr) {
  TraceEvent e;
  e.seq = seq;
  e.kind = EventKind::Delete;
  e.start_ns = t0;
  e.end_ns = t1;
  e.dst_device = dev;
  e.dst_addr = dst_addr;
  return e;
}

inline TraceEvent kernel(std::uint64_t seq, std::uint64_t t0, std::uint64_t t1,
                         DeviceNum dev) {
  TraceEvent e;
  e.seq = seq;
  e.kind = EventKind::Kernel;
  e.start_ns = t0;
  e.end_ns = t1;
  e.src_device = dev;
  e.dst_device = dev;
  return e;
}

// Host is device 0 unless given.
inline Trace make_trace(std::vector<TraceEvent> events,
                        std::uint32_t num_devices = 3, DeviceNum host = 0) {
  Trace t;
  t.num_devices_total = num_devices;
  t.host_device = host;
  t.events = std::move(events);
  std::sort(t.events.begin(), t.events.end(), chrono_less);
  return t;
}

inline std::vector<std::uint64_t> seqs(const std::vector<TraceEvent> &events) {
  std::vector<std::uint64_t> out;
  for (const TraceEvent &e : events) {
    out.push_back(e.seq);
  }
  return out;
}

} // namespace dmlens::test

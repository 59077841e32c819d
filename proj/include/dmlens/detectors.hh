#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dmlens/event_prep.hh"
#include "dmlens/trace.hh"

namespace dmlens {

struct DuplicateKey {
  std::uint64_t hash;
  DeviceNum dest_device;

  auto operator<=>(const DuplicateKey &) const = default;
};

// Every transfer that delivered the same content to the same device,
// including the first one.
struct DuplicateGroup {
  DuplicateKey key;
  std::vector<TraceEvent> events;

  bool operator==(const DuplicateGroup &) const = default;
};

struct RoundTripKey {
  std::uint64_t hash;
  DeviceNum src_device;
  DeviceNum dest_device;

  auto operator<=>(const RoundTripKey &) const = default;
};

struct RoundTrip {
  TraceEvent tx_event; // outbound leg, src_device -> dest_device
  TraceEvent rx_event; // return leg, received back at src_device

  bool operator==(const RoundTrip &) const = default;
};

struct RoundTripGroup {
  RoundTripKey key;
  std::vector<RoundTrip> trips;

  bool operator==(const RoundTripGroup &) const = default;
};

struct RepeatedAllocKey {
  std::uint64_t host_addr;
  DeviceNum tgt_device;
  std::uint64_t bytes;

  auto operator<=>(const RepeatedAllocKey &) const = default;
};

struct RepeatedAllocGroup {
  RepeatedAllocKey key;
  std::vector<AllocPair> pairs;

  bool operator==(const RepeatedAllocGroup &) const = default;
};

struct Findings {
  std::vector<DuplicateGroup> duplicates;
  std::vector<RoundTripGroup> round_trips;
  std::vector<RepeatedAllocGroup> repeated_allocs;
  std::vector<AllocPair> unused_allocs;
  std::vector<TraceEvent> unused_transfers;

  bool empty() const {
    return duplicates.empty() && round_trips.empty() &&
           repeated_allocs.empty() && unused_allocs.empty() &&
           unused_transfers.empty();
  }

  bool operator==(const Findings &) const = default;
};

struct DetectorOptions {
  /* Unguarded round-trip search: receptions are peeked without being
   * consumed and without checking that they follow the outbound transfer.
   * Off by default: a return leg must come after its outbound leg in
   * (start_ns, seq) order and is matched at most once.
   */
  bool strict_round_trips = false;
};

// Transfers must be chronological; events that are not non-empty hashed
// transfers are skipped.
std::vector<DuplicateGroup>
find_duplicate_transfers(std::span<const TraceEvent> data_op_events);

std::vector<RoundTripGroup>
find_round_trips(std::span<const TraceEvent> data_op_events,
                 const DetectorOptions &options = {});

std::vector<RepeatedAllocGroup>
find_repeated_allocs(std::span<const TraceEvent> data_op_events);

// Pairs on `skip_device` (normally the host) are never examined.
std::vector<AllocPair>
find_unused_allocs(std::span<const TraceEvent> tgt_events,
                   std::span<const TraceEvent> data_op_events,
                   std::uint32_t num_devices_total,
                   std::optional<DeviceNum> skip_device = std::nullopt);

std::vector<TraceEvent>
find_unused_transfers(std::span<const TraceEvent> tgt_events,
                      std::span<const TraceEvent> data_op_events,
                      std::uint32_t num_devices_total,
                      std::optional<DeviceNum> skip_device = std::nullopt);

// Throws Error(InvalidTrace) when validate(trace) is non-empty.
Findings analyze(const Trace &trace, const DetectorOptions &options = {},
                 std::vector<PrepWarning> *warnings = nullptr);

// Drops duplicate groups and round trips whose transfers carry fewer than
// min_bytes bytes.
void filter_min_bytes(Findings &findings, std::uint64_t min_bytes);

} // namespace dmlens

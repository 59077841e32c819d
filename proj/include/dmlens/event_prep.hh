#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmlens/trace.hh"

namespace dmlens {

// seq carried by the delete half of a pair whose allocation was never freed.
inline constexpr std::uint64_t kSyntheticSeq =
    std::numeric_limits<std::uint64_t>::max();

struct AllocPair {
  TraceEvent alloc_event;
  TraceEvent delete_event;
  bool synthetic_delete = false;

  bool operator==(const AllocPair &) const = default;
};

struct PrepWarning {
  std::uint64_t seq;
  std::string reason;
};

/* Matches each Delete with the most recent unmatched Alloc at the same
 * (dst_device, dst_addr). Allocations still live at the end are closed by a
 * synthetic delete at `horizon_ns` (default: max end_ns of the input).
 * Deletes with no live allocation are dropped and appended to `warnings`.
 * Transfers and kernels in the input are ignored. Pairs are ordered by the
 * allocation's position in the input.
 */
std::vector<AllocPair>
get_alloc_delete_pairs(std::span<const TraceEvent> data_op_events,
                       std::optional<std::uint64_t> horizon_ns = std::nullopt,
                       std::vector<PrepWarning> *warnings = nullptr);

// Same, over borrowed events.
std::vector<AllocPair>
get_alloc_delete_pairs(std::span<const TraceEvent *const> data_op_events,
                       std::optional<std::uint64_t> horizon_ns = std::nullopt,
                       std::vector<PrepWarning> *warnings = nullptr);

enum class DeviceKey { Src, Dst };

/* Partitions items into num_devices_total chronologically ordered buckets by
 * the device `device_of(item)` returns. Throws Error(DeviceOutOfRange).
 */
template <class T, class DeviceOf>
std::vector<std::vector<T>> sort_by_device(std::span<const T> items,
                                           std::uint32_t num_devices_total,
                                           DeviceOf device_of) {
  std::vector<std::vector<T>> out(num_devices_total);
  for (const T &item : items) {
    const DeviceNum dev = device_of(item);
    if (dev >= num_devices_total) {
      throw Error(ErrorCode::DeviceOutOfRange,
                  "device " + std::to_string(dev) + " out of range (" +
                      std::to_string(num_devices_total) + " slots)");
    }
    out[dev].push_back(item);
  }
  return out;
}

std::vector<std::vector<TraceEvent>>
sort_by_device(std::span<const TraceEvent> events,
               std::uint32_t num_devices_total, DeviceKey key);

} // namespace dmlens

#include "dmlens/event_prep.hh"

#include <algorithm>
#include <unordered_map>

namespace dmlens {

namespace {

struct MappingKey {
  DeviceNum device;
  std::uint64_t addr;

  bool operator==(const MappingKey &) const = default;
};

struct MappingKeyHash {
  std::size_t operator()(const MappingKey &k) const {
    return std::hash<std::uint64_t>{}(k.addr * 0x9E3779B97F4A7C15ull ^ k.device);
  }
};

template <class At>
std::vector<AllocPair> pair_allocs(std::size_t n, At at,
                                   std::optional<std::uint64_t> horizon_ns,
                                   std::vector<PrepWarning> *warnings) {
  std::uint64_t horizon = 0;
  if (horizon_ns) {
    horizon = *horizon_ns;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      horizon = std::max(horizon, at(i).end_ns);
    }
  }

  // Per mapping, a stack of indices into data_op_events of live allocations.
  std::unordered_map<MappingKey, std::vector<std::size_t>, MappingKeyHash> live;
  // Indexed by the alloc's input position so output order needs no sort.
  std::vector<std::optional<std::size_t>> delete_for(n);
  std::vector<std::size_t> alloc_positions;

  for (std::size_t i = 0; i < n; ++i) {
    const TraceEvent &e = at(i);
    if (e.kind == EventKind::Alloc) {
      live[{e.dst_device, e.dst_addr}].push_back(i);
      alloc_positions.push_back(i);
    } else if (e.kind == EventKind::Delete) {
      auto it = live.find({e.dst_device, e.dst_addr});
      if (it == live.end() || it->second.empty()) {
        if (warnings != nullptr) {
          warnings->push_back(
              {e.seq, "delete of device address with no live allocation"});
        }
        continue;
      }
      delete_for[it->second.back()] = i;
      it->second.pop_back();
    }
  }

  std::vector<AllocPair> pairs;
  pairs.reserve(alloc_positions.size());
  for (const std::size_t pos : alloc_positions) {
    const TraceEvent &alloc = at(pos);
    if (delete_for[pos]) {
      pairs.push_back({alloc, at(*delete_for[pos]), false});
      continue;
    }
    TraceEvent synthetic;
    synthetic.seq = kSyntheticSeq;
    synthetic.kind = EventKind::Delete;
    synthetic.start_ns = std::max(horizon, alloc.end_ns);
    synthetic.end_ns = synthetic.start_ns;
    synthetic.src_device = alloc.src_device;
    synthetic.dst_device = alloc.dst_device;
    synthetic.dst_addr = alloc.dst_addr;
    synthetic.loc = alloc.loc;
    pairs.push_back({alloc, std::move(synthetic), true});
  }
  return pairs;
}

} // namespace

std::vector<AllocPair>
get_alloc_delete_pairs(std::span<const TraceEvent> data_op_events,
                       std::optional<std::uint64_t> horizon_ns,
                       std::vector<PrepWarning> *warnings) {
  return pair_allocs(
      data_op_events.size(),
      [&](std::size_t i) -> const TraceEvent & { return data_op_events[i]; },
      horizon_ns, warnings);
}

std::vector<AllocPair>
get_alloc_delete_pairs(std::span<const TraceEvent *const> data_op_events,
                       std::optional<std::uint64_t> horizon_ns,
                       std::vector<PrepWarning> *warnings) {
  return pair_allocs(
      data_op_events.size(),
      [&](std::size_t i) -> const TraceEvent & { return *data_op_events[i]; },
      horizon_ns, warnings);
}

std::vector<std::vector<TraceEvent>>
sort_by_device(std::span<const TraceEvent> events,
               std::uint32_t num_devices_total, DeviceKey key) {
  if (key == DeviceKey::Src) {
    return sort_by_device(events, num_devices_total,
                          [](const TraceEvent &e) { return e.src_device; });
  }
  return sort_by_device(events, num_devices_total,
                        [](const TraceEvent &e) { return e.dst_device; });
}

} // namespace dmlens

#include "dmlens/detectors.hh"

#include <algorithm>
#include <unordered_map>

namespace dmlens {

namespace {

using EventRefs = std::vector<const TraceEvent *>;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  return h;
}

struct DuplicateKeyHash {
  std::size_t operator()(const DuplicateKey &k) const {
    return mix(k.hash, k.dest_device);
  }
};

struct RoundTripKeyHash {
  std::size_t operator()(const RoundTripKey &k) const {
    return mix(mix(k.hash, k.src_device), k.dest_device);
  }
};

struct RepeatedAllocKeyHash {
  std::size_t operator()(const RepeatedAllocKey &k) const {
    return mix(mix(k.host_addr, k.tgt_device), k.bytes);
  }
};

bool content_comparable(const TraceEvent &e) {
  return e.kind == EventKind::Transfer && e.bytes > 0 && e.hash != 0;
}

EventRefs refs_of(std::span<const TraceEvent> events, EventKind kind) {
  EventRefs out;
  for (const TraceEvent &e : events) {
    if (e.kind == kind) {
      out.push_back(&e);
    }
  }
  return out;
}

// Emission order for groups: first event's start time, then key.
template <class Group, class FirstStart>
void order_groups(std::vector<Group> &groups, FirstStart first_start) {
  std::sort(groups.begin(), groups.end(),
            [&](const Group &a, const Group &b) {
              const std::uint64_t sa = first_start(a);
              const std::uint64_t sb = first_start(b);
              if (sa != sb) {
                return sa < sb;
              }
              return a.key < b.key;
            });
}

std::vector<DuplicateGroup> duplicates_impl(const EventRefs &transfers) {
  std::unordered_map<DuplicateKey, std::vector<const TraceEvent *>,
                     DuplicateKeyHash>
      received;
  for (const TraceEvent *e : transfers) {
    if (!content_comparable(*e)) {
      continue;
    }
    received[{e->hash, e->dst_device}].push_back(e);
  }

  std::vector<DuplicateGroup> groups;
  for (const auto &[key, events] : received) {
    if (events.size() < 2) {
      continue;
    }
    DuplicateGroup g{key, {}};
    g.events.reserve(events.size());
    for (const TraceEvent *e : events) {
      g.events.push_back(*e);
    }
    groups.push_back(std::move(g));
  }
  order_groups(groups, [](const DuplicateGroup &g) {
    return g.events.front().start_ns;
  });
  return groups;
}

// Queue of receptions; popped entries are skipped via `head`.
struct Fifo {
  std::vector<std::size_t> items;
  std::size_t head = 0;

  bool empty() const { return head == items.size(); }
};

std::vector<RoundTripGroup> round_trips_impl(const EventRefs &all,
                                             const DetectorOptions &options) {
  EventRefs transfers;
  for (const TraceEvent *e : all) {
    if (content_comparable(*e)) {
      transfers.push_back(e);
    }
  }

  // Receptions per (hash, receiving device) as indices into `transfers`,
  // whose order is (start_ns, seq).
  std::unordered_map<DuplicateKey, Fifo, DuplicateKeyHash> received;
  for (std::size_t i = 0; i < transfers.size(); ++i) {
    received[{transfers[i]->hash, transfers[i]->dst_device}].items.push_back(i);
  }

  std::unordered_map<RoundTripKey, std::vector<RoundTrip>, RoundTripKeyHash>
      round_trips;
  for (std::size_t tx_idx = 0; tx_idx < transfers.size(); ++tx_idx) {
    const TraceEvent &tx = *transfers[tx_idx];
    auto rx_it = received.find({tx.hash, tx.src_device});
    if (rx_it == received.end()) {
      // Not a round trip, the data is never sent back.
      continue;
    }
    Fifo &rx_queue = rx_it->second;

    if (options.strict_round_trips) {
      if (rx_queue.empty()) {
        continue;
      }
      const TraceEvent &rx = *transfers[rx_queue.items[rx_queue.head]];
      round_trips[{tx.hash, tx.src_device, tx.dst_device}].push_back({tx, rx});
      // Avoid counting this as a round trip for other transfers.
      Fifo &tx_queue = received[{tx.hash, tx.dst_device}];
      if (!tx_queue.empty()) {
        ++tx_queue.head;
      }
      continue;
    }

    // Receptions at or before tx can never complete this or any later trip.
    // This also retires tx itself from its own queue.
    while (!rx_queue.empty() && rx_queue.items[rx_queue.head] <= tx_idx) {
      ++rx_queue.head;
    }
    if (rx_queue.empty()) {
      continue;
    }
    const TraceEvent &rx = *transfers[rx_queue.items[rx_queue.head]];
    ++rx_queue.head;
    round_trips[{tx.hash, tx.src_device, tx.dst_device}].push_back({tx, rx});
  }

  std::vector<RoundTripGroup> groups;
  groups.reserve(round_trips.size());
  for (auto &[key, trips] : round_trips) {
    groups.push_back({key, std::move(trips)});
  }
  order_groups(groups, [](const RoundTripGroup &g) {
    return g.trips.front().tx_event.start_ns;
  });
  return groups;
}

std::vector<RepeatedAllocGroup>
repeated_allocs_impl(const std::vector<AllocPair> &pairs) {
  std::unordered_map<RepeatedAllocKey, std::vector<const AllocPair *>,
                     RepeatedAllocKeyHash>
      repeated;
  for (const AllocPair &p : pairs) {
    const TraceEvent &a = p.alloc_event;
    repeated[{a.src_addr, a.dst_device, a.bytes}].push_back(&p);
  }

  std::vector<RepeatedAllocGroup> groups;
  for (const auto &[key, members] : repeated) {
    if (members.size() < 2) {
      continue;
    }
    RepeatedAllocGroup g{key, {}};
    g.pairs.reserve(members.size());
    for (const AllocPair *p : members) {
      g.pairs.push_back(*p);
    }
    groups.push_back(std::move(g));
  }
  order_groups(groups, [](const RepeatedAllocGroup &g) {
    return g.pairs.front().alloc_event.start_ns;
  });
  return groups;
}

std::vector<AllocPair> unused_allocs_impl(const EventRefs &kernels,
                                          const std::vector<AllocPair> &pairs,
                                          std::uint32_t num_devices_total,
                                          std::optional<DeviceNum> skip_device) {
  const auto device_kernels =
      sort_by_device(std::span<const TraceEvent *const>(kernels),
                     num_devices_total,
                     [](const TraceEvent *e) { return e->dst_device; });
  std::vector<const AllocPair *> pair_refs;
  pair_refs.reserve(pairs.size());
  for (const AllocPair &p : pairs) {
    pair_refs.push_back(&p);
  }
  const auto device_allocs = sort_by_device(
      std::span<const AllocPair *const>(pair_refs), num_devices_total,
      [](const AllocPair *p) { return p->alloc_event.dst_device; });

  std::vector<AllocPair> unused;
  // Find allocations that do not overlap with target execution.
  for (DeviceNum dev = 0; dev < num_devices_total; ++dev) {
    if (skip_device && dev == *skip_device) {
      continue;
    }
    const auto &tgt = device_kernels[dev];
    std::size_t tgt_idx = 0;
    for (const AllocPair *p : device_allocs[dev]) {
      while (tgt_idx < tgt.size() &&
             tgt[tgt_idx]->end_ns < p->alloc_event.start_ns) {
        ++tgt_idx;
      }
      if (tgt_idx == tgt.size() ||
          tgt[tgt_idx]->start_ns > p->delete_event.end_ns) {
        unused.push_back(*p);
      }
    }
  }
  std::sort(unused.begin(), unused.end(),
            [](const AllocPair &a, const AllocPair &b) {
              return chrono_less(a.alloc_event, b.alloc_event);
            });
  return unused;
}

std::vector<TraceEvent>
unused_transfers_impl(const EventRefs &kernels, const EventRefs &transfers,
                      std::uint32_t num_devices_total,
                      std::optional<DeviceNum> skip_device) {
  auto dst_of = [](const TraceEvent *e) { return e->dst_device; };
  const auto device_kernels = sort_by_device(
      std::span<const TraceEvent *const>(kernels), num_devices_total, dst_of);
  const auto device_transfers = sort_by_device(
      std::span<const TraceEvent *const>(transfers), num_devices_total, dst_of);

  std::vector<TraceEvent> unused;
  // Find transfers from the same host address that occur more than once
  // between target executions.
  for (DeviceNum dev = 0; dev < num_devices_total; ++dev) {
    if (skip_device && dev == *skip_device) {
      continue;
    }
    const auto &tgt = device_kernels[dev];
    std::size_t tgt_idx = 0;
    std::unordered_map<std::uint64_t /*src_addr*/, const TraceEvent *> candidates;
    for (const TraceEvent *tx : device_transfers[dev]) {
      while (tgt_idx < tgt.size() && tgt[tgt_idx]->end_ns < tx->start_ns) {
        ++tgt_idx;
        candidates.clear();
      }
      if (tgt_idx == tgt.size()) {
        // Transfer occurs after last active kernel.
        unused.push_back(*tx);
      } else if (tgt[tgt_idx]->start_ns > tx->start_ns) {
        // Transfer doesn't overlap with an active kernel.
        auto [it, inserted] = candidates.try_emplace(tx->src_addr, tx);
        if (!inserted) {
          unused.push_back(*it->second);
          it->second = tx;
        }
      } else {
        candidates.clear();
      }
    }
  }
  std::sort(unused.begin(), unused.end(), chrono_less);
  return unused;
}

EventRefs all_refs(std::span<const TraceEvent> events) {
  EventRefs out;
  out.reserve(events.size());
  for (const TraceEvent &e : events) {
    out.push_back(&e);
  }
  return out;
}

} // namespace

std::vector<DuplicateGroup>
find_duplicate_transfers(std::span<const TraceEvent> data_op_events) {
  return duplicates_impl(all_refs(data_op_events));
}

std::vector<RoundTripGroup>
find_round_trips(std::span<const TraceEvent> data_op_events,
                 const DetectorOptions &options) {
  return round_trips_impl(all_refs(data_op_events), options);
}

std::vector<RepeatedAllocGroup>
find_repeated_allocs(std::span<const TraceEvent> data_op_events) {
  return repeated_allocs_impl(get_alloc_delete_pairs(data_op_events));
}

std::vector<AllocPair>
find_unused_allocs(std::span<const TraceEvent> tgt_events,
                   std::span<const TraceEvent> data_op_events,
                   std::uint32_t num_devices_total,
                   std::optional<DeviceNum> skip_device) {
  std::uint64_t horizon = 0;
  for (const TraceEvent &e : tgt_events) {
    horizon = std::max(horizon, e.end_ns);
  }
  for (const TraceEvent &e : data_op_events) {
    horizon = std::max(horizon, e.end_ns);
  }
  return unused_allocs_impl(refs_of(tgt_events, EventKind::Kernel),
                            get_alloc_delete_pairs(data_op_events, horizon),
                            num_devices_total, skip_device);
}

std::vector<TraceEvent>
find_unused_transfers(std::span<const TraceEvent> tgt_events,
                      std::span<const TraceEvent> data_op_events,
                      std::uint32_t num_devices_total,
                      std::optional<DeviceNum> skip_device) {
  return unused_transfers_impl(refs_of(tgt_events, EventKind::Kernel),
                               refs_of(data_op_events, EventKind::Transfer),
                               num_devices_total, skip_device);
}

Findings analyze(const Trace &trace, const DetectorOptions &options,
                 std::vector<PrepWarning> *warnings) {
  const std::vector<Violation> violations = validate(trace);
  if (!violations.empty()) {
    throw Error(ErrorCode::InvalidTrace,
                "cannot analyze invalid trace: " + to_string(violations.front()));
  }

  EventRefs transfers;
  EventRefs alloc_ops;
  EventRefs kernels;
  std::uint64_t horizon = 0;
  for (const TraceEvent &e : trace.events) {
    horizon = std::max(horizon, e.end_ns);
    switch (e.kind) {
    case EventKind::Transfer:
      transfers.push_back(&e);
      break;
    case EventKind::Alloc:
    case EventKind::Delete:
      alloc_ops.push_back(&e);
      break;
    case EventKind::Kernel:
      kernels.push_back(&e);
      break;
    }
  }
  const std::vector<AllocPair> pairs =
      get_alloc_delete_pairs(std::span<const TraceEvent *const>(alloc_ops),
                             horizon, warnings);

  Findings f;
  f.duplicates = duplicates_impl(transfers);
  f.round_trips = round_trips_impl(transfers, options);
  f.repeated_allocs = repeated_allocs_impl(pairs);
  f.unused_allocs = unused_allocs_impl(kernels, pairs, trace.num_devices_total,
                                       trace.host_device);
  f.unused_transfers = unused_transfers_impl(
      kernels, transfers, trace.num_devices_total, trace.host_device);
  return f;
}

void filter_min_bytes(Findings &findings, std::uint64_t min_bytes) {
  if (min_bytes <= 1) {
    return;
  }
  std::erase_if(findings.duplicates, [&](const DuplicateGroup &g) {
    return g.events.front().bytes < min_bytes;
  });
  for (RoundTripGroup &g : findings.round_trips) {
    std::erase_if(g.trips, [&](const RoundTrip &t) {
      return t.tx_event.bytes < min_bytes;
    });
  }
  std::erase_if(findings.round_trips,
                [](const RoundTripGroup &g) { return g.trips.empty(); });
}

} // namespace dmlens

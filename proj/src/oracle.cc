#include "dmlens/oracle.hh"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace dmlens::oracle {

namespace {

bool before(const TraceEvent &a, const TraceEvent &b) {
  return std::tie(a.start_ns, a.seq) < std::tie(b.start_ns, b.seq);
}

std::vector<TraceEvent> of_kind(const Trace &trace, EventKind kind) {
  std::vector<TraceEvent> out;
  for (const TraceEvent &e : trace.events) {
    if (e.kind == kind) {
      out.push_back(e);
    }
  }
  return out;
}

std::vector<TraceEvent> hashed_transfers(const Trace &trace) {
  std::vector<TraceEvent> out;
  for (const TraceEvent &e : trace.events) {
    if (e.kind == EventKind::Transfer && e.bytes > 0 && e.hash != 0) {
      out.push_back(e);
    }
  }
  return out;
}

// Each Delete closes the latest earlier Alloc at the same device address
// that nothing has closed yet; found by scanning backwards.
std::vector<AllocPair> brute_force_pairs(const Trace &trace) {
  std::vector<TraceEvent> ops;
  std::uint64_t horizon = 0;
  for (const TraceEvent &e : trace.events) {
    horizon = std::max(horizon, e.end_ns);
    if (e.kind == EventKind::Alloc || e.kind == EventKind::Delete) {
      ops.push_back(e);
    }
  }

  std::vector<int> closed_by(ops.size(), -1);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (ops[i].kind != EventKind::Delete) {
      continue;
    }
    for (std::size_t j = i; j-- > 0;) {
      if (ops[j].kind == EventKind::Alloc && closed_by[j] < 0 &&
          ops[j].dst_device == ops[i].dst_device &&
          ops[j].dst_addr == ops[i].dst_addr) {
        closed_by[j] = static_cast<int>(i);
        break;
      }
    }
  }

  std::vector<AllocPair> pairs;
  for (std::size_t j = 0; j < ops.size(); ++j) {
    if (ops[j].kind != EventKind::Alloc) {
      continue;
    }
    if (closed_by[j] >= 0) {
      pairs.push_back({ops[j], ops[static_cast<std::size_t>(closed_by[j])], false});
    } else {
      TraceEvent end_of_trace;
      end_of_trace.seq = kSyntheticSeq;
      end_of_trace.kind = EventKind::Delete;
      end_of_trace.start_ns = std::max(horizon, ops[j].end_ns);
      end_of_trace.end_ns = end_of_trace.start_ns;
      end_of_trace.src_device = ops[j].src_device;
      end_of_trace.dst_device = ops[j].dst_device;
      end_of_trace.dst_addr = ops[j].dst_addr;
      end_of_trace.loc = ops[j].loc;
      pairs.push_back({ops[j], end_of_trace, true});
    }
  }
  return pairs;
}

// Index into `kernels` of the first kernel (in chronological order) on
// `device` that has not ended before `t`, or -1 if every one has.
long first_live_kernel(const std::vector<TraceEvent> &kernels,
                       DeviceNum device, std::uint64_t t) {
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    if (kernels[k].dst_device == device && kernels[k].end_ns >= t) {
      return static_cast<long>(k);
    }
  }
  return -1;
}

} // namespace

std::vector<DuplicateGroup> oracle_duplicates(const Trace &trace) {
  const std::vector<TraceEvent> transfers = hashed_transfers(trace);
  std::vector<bool> grouped(transfers.size(), false);
  std::vector<DuplicateGroup> groups;
  for (std::size_t i = 0; i < transfers.size(); ++i) {
    if (grouped[i]) {
      continue;
    }
    DuplicateGroup g{{transfers[i].hash, transfers[i].dst_device}, {transfers[i]}};
    for (std::size_t j = i + 1; j < transfers.size(); ++j) {
      if (transfers[j].hash == transfers[i].hash &&
          transfers[j].dst_device == transfers[i].dst_device) {
        g.events.push_back(transfers[j]);
        grouped[j] = true;
      }
    }
    if (g.events.size() >= 2) {
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

std::vector<RoundTripGroup> oracle_round_trips(const Trace &trace) {
  const std::vector<TraceEvent> transfers = hashed_transfers(trace);
  std::vector<bool> used(transfers.size(), false);
  std::vector<RoundTripGroup> groups;
  for (const TraceEvent &tx : transfers) {
    long best = -1;
    for (std::size_t r = 0; r < transfers.size(); ++r) {
      const TraceEvent &rx = transfers[r];
      if (used[r] || rx.hash != tx.hash || rx.dst_device != tx.src_device ||
          !before(tx, rx)) {
        continue;
      }
      if (best < 0 || before(rx, transfers[static_cast<std::size_t>(best)])) {
        best = static_cast<long>(r);
      }
    }
    if (best < 0) {
      continue;
    }
    used[static_cast<std::size_t>(best)] = true;
    const RoundTripKey key{tx.hash, tx.src_device, tx.dst_device};
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const RoundTripGroup &g) { return g.key == key; });
    if (it == groups.end()) {
      groups.push_back({key, {}});
      it = std::prev(groups.end());
    }
    it->trips.push_back({tx, transfers[static_cast<std::size_t>(best)]});
  }
  return groups;
}

std::vector<RepeatedAllocGroup> oracle_repeated_allocs(const Trace &trace) {
  const std::vector<AllocPair> pairs = brute_force_pairs(trace);
  std::vector<bool> grouped(pairs.size(), false);
  std::vector<RepeatedAllocGroup> groups;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (grouped[i]) {
      continue;
    }
    const TraceEvent &a = pairs[i].alloc_event;
    RepeatedAllocGroup g{{a.src_addr, a.dst_device, a.bytes}, {pairs[i]}};
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      const TraceEvent &b = pairs[j].alloc_event;
      if (b.src_addr == a.src_addr && b.dst_device == a.dst_device &&
          b.bytes == a.bytes) {
        g.pairs.push_back(pairs[j]);
        grouped[j] = true;
      }
    }
    if (g.pairs.size() >= 2) {
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

std::vector<AllocPair> oracle_unused_allocs(const Trace &trace) {
  const std::vector<TraceEvent> kernels = of_kind(trace, EventKind::Kernel);
  std::vector<AllocPair> unused;
  for (const AllocPair &p : brute_force_pairs(trace)) {
    if (p.alloc_event.dst_device == trace.host_device) {
      continue;
    }
    const bool touched = std::any_of(
        kernels.begin(), kernels.end(), [&](const TraceEvent &k) {
          return k.dst_device == p.alloc_event.dst_device &&
                 k.start_ns <= p.delete_event.end_ns &&
                 k.end_ns >= p.alloc_event.start_ns;
        });
    if (!touched) {
      unused.push_back(p);
    }
  }
  return unused;
}

std::vector<TraceEvent> oracle_unused_transfers(const Trace &trace) {
  const std::vector<TraceEvent> kernels = of_kind(trace, EventKind::Kernel);
  const std::vector<TraceEvent> transfers = of_kind(trace, EventKind::Transfer);
  std::vector<TraceEvent> unused;

  for (std::size_t i = 0; i < transfers.size(); ++i) {
    const TraceEvent &t = transfers[i];
    const DeviceNum dev = t.dst_device;
    if (dev == trace.host_device) {
      continue;
    }
    const long k = first_live_kernel(kernels, dev, t.start_ns);
    if (k < 0) {
      // Every kernel on the device finished before the data arrived.
      unused.push_back(t);
      continue;
    }
    const TraceEvent &kernel = kernels[static_cast<std::size_t>(k)];
    if (kernel.start_ns <= t.start_ns) {
      continue; // a kernel is running when the data arrives
    }

    // Overwritten: a later transfer from the same host address lands before
    // the same kernel starts, and no transfer in between arrives while a
    // kernel on the device is running.
    bool overwritten = false;
    for (std::size_t j = i + 1; j < transfers.size() && !overwritten; ++j) {
      const TraceEvent &u = transfers[j];
      if (u.dst_device != dev || u.src_addr != t.src_addr) {
        continue;
      }
      if (first_live_kernel(kernels, dev, u.start_ns) != k ||
          kernel.start_ns <= u.start_ns) {
        continue;
      }
      bool interrupted = false;
      for (std::size_t w = i + 1; w < j; ++w) {
        const TraceEvent &mid = transfers[w];
        if (mid.dst_device == dev && kernel.start_ns <= mid.start_ns) {
          interrupted = true;
          break;
        }
      }
      overwritten = !interrupted;
    }
    if (overwritten) {
      unused.push_back(t);
    }
  }
  return unused;
}

Findings oracle_analyze(const Trace &trace) {
  Findings f;
  f.duplicates = oracle_duplicates(trace);
  f.round_trips = oracle_round_trips(trace);
  f.repeated_allocs = oracle_repeated_allocs(trace);
  f.unused_allocs = oracle_unused_allocs(trace);
  f.unused_transfers = oracle_unused_transfers(trace);
  return f;
}

namespace {

using SeqList = std::vector<std::uint64_t>;

std::set<SeqList> duplicate_sets(const Findings &f) {
  std::set<SeqList> out;
  for (const DuplicateGroup &g : f.duplicates) {
    SeqList seqs;
    for (const TraceEvent &e : g.events) {
      seqs.push_back(e.seq);
    }
    std::sort(seqs.begin(), seqs.end());
    seqs.push_back(g.key.hash);
    seqs.push_back(g.key.dest_device);
    out.insert(seqs);
  }
  return out;
}

std::set<SeqList> round_trip_sets(const Findings &f) {
  std::set<SeqList> out;
  for (const RoundTripGroup &g : f.round_trips) {
    for (const RoundTrip &t : g.trips) {
      out.insert({g.key.hash, g.key.src_device, g.key.dest_device,
                  t.tx_event.seq, t.rx_event.seq});
    }
  }
  return out;
}

SeqList pair_seqs(const AllocPair &p) {
  return {p.alloc_event.seq, p.synthetic_delete ? kSyntheticSeq : p.delete_event.seq};
}

std::set<SeqList> repeated_alloc_sets(const Findings &f) {
  std::set<SeqList> out;
  for (const RepeatedAllocGroup &g : f.repeated_allocs) {
    std::vector<SeqList> members;
    for (const AllocPair &p : g.pairs) {
      members.push_back(pair_seqs(p));
    }
    std::sort(members.begin(), members.end());
    SeqList flat{g.key.host_addr, g.key.tgt_device, g.key.bytes};
    for (const SeqList &m : members) {
      flat.insert(flat.end(), m.begin(), m.end());
    }
    out.insert(flat);
  }
  return out;
}

std::set<SeqList> unused_alloc_sets(const Findings &f) {
  std::set<SeqList> out;
  for (const AllocPair &p : f.unused_allocs) {
    out.insert(pair_seqs(p));
  }
  return out;
}

std::set<SeqList> unused_transfer_sets(const Findings &f) {
  std::set<SeqList> out;
  for (const TraceEvent &e : f.unused_transfers) {
    out.insert({e.seq});
  }
  return out;
}

std::string render(const SeqList &s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << (i ? " " : "") << s[i];
  }
  os << ']';
  return os.str();
}

void diff_sets(const char *category, const std::set<SeqList> &detected,
               const std::set<SeqList> &expected,
               std::vector<std::string> &out) {
  for (const SeqList &s : detected) {
    if (!expected.contains(s)) {
      out.push_back(std::string(category) + ": detector-only " + render(s));
    }
  }
  for (const SeqList &s : expected) {
    if (!detected.contains(s)) {
      out.push_back(std::string(category) + ": oracle-only " + render(s));
    }
  }
}

} // namespace

std::vector<std::string> diff_findings(const Findings &detected,
                                       const Findings &expected) {
  std::vector<std::string> out;
  diff_sets("duplicates", duplicate_sets(detected), duplicate_sets(expected), out);
  diff_sets("round_trips", round_trip_sets(detected), round_trip_sets(expected),
            out);
  diff_sets("repeated_allocs", repeated_alloc_sets(detected),
            repeated_alloc_sets(expected), out);
  diff_sets("unused_allocs", unused_alloc_sets(detected),
            unused_alloc_sets(expected), out);
  diff_sets("unused_transfers", unused_transfer_sets(detected),
            unused_transfer_sets(expected), out);
  return out;
}

} // namespace dmlens::oracle

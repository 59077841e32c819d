#include "dmlens/estimator.hh"

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

namespace dmlens {

std::string_view category_code(Category c) {
  switch (c) {
  case Category::DuplicateTransfer:
    return "DD";
  case Category::RoundTrip:
    return "RT";
  case Category::RepeatedAlloc:
    return "RA";
  case Category::UnusedAlloc:
    return "UA";
  case Category::UnusedTransfer:
    return "UT";
  }
  return "??";
}

namespace {

bool any_overlap(const Trace &trace) {
  // Events are sorted by start; an event starting before the latest end seen
  // so far overlaps something.
  std::uint64_t latest_end = 0;
  bool first = true;
  for (const TraceEvent &e : trace.events) {
    if (!first && e.start_ns < latest_end) {
      return true;
    }
    latest_end = first ? e.end_ns : std::max(latest_end, e.end_ns);
    first = false;
  }
  return false;
}

} // namespace

SavingsEstimate estimate(const Trace &trace, const Findings &findings) {
  // (seq, duration), sorted by seq.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> durations;
  durations.reserve(trace.events.size());
  for (const TraceEvent &e : trace.events) {
    durations.emplace_back(e.seq, e.duration_ns());
  }
  std::sort(durations.begin(), durations.end());
  auto duration_of = [&](std::uint64_t seq) -> const std::uint64_t * {
    const auto it = std::lower_bound(
        durations.begin(), durations.end(), seq,
        [](const auto &d, std::uint64_t s) { return d.first < s; });
    return it == durations.end() || it->first != seq ? nullptr : &it->second;
  };

  SavingsEstimate est;
  est.wall_time_ns = trace.wall_time();
  std::array<std::vector<std::uint64_t>, 5> per_category;

  auto add = [&](Category c, const TraceEvent &e) {
    if (e.seq == kSyntheticSeq) {
      return; // never-freed allocation; nothing to remove
    }
    per_category[static_cast<std::size_t>(c)].push_back(e.seq);
  };

  for (const DuplicateGroup &g : findings.duplicates) {
    // The first transfer is necessary.
    for (std::size_t i = 1; i < g.events.size(); ++i) {
      add(Category::DuplicateTransfer, g.events[i]);
    }
  }
  for (const RoundTripGroup &g : findings.round_trips) {
    for (const RoundTrip &t : g.trips) {
      add(Category::RoundTrip, t.rx_event);
    }
  }
  for (const RepeatedAllocGroup &g : findings.repeated_allocs) {
    for (std::size_t i = 1; i < g.pairs.size(); ++i) {
      add(Category::RepeatedAlloc, g.pairs[i].alloc_event);
      add(Category::RepeatedAlloc, g.pairs[i].delete_event);
    }
  }
  for (const AllocPair &p : findings.unused_allocs) {
    add(Category::UnusedAlloc, p.alloc_event);
    add(Category::UnusedAlloc, p.delete_event);
  }
  for (const TraceEvent &e : findings.unused_transfers) {
    add(Category::UnusedTransfer, e);
  }

  std::vector<std::uint64_t> &all = est.eliminable_seqs;
  for (std::size_t c = 0; c < per_category.size(); ++c) {
    std::vector<std::uint64_t> &seqs = per_category[c];
    std::sort(seqs.begin(), seqs.end());
    seqs.erase(std::unique(seqs.begin(), seqs.end()), seqs.end());
    for (const std::uint64_t seq : seqs) {
      const std::uint64_t *d = duration_of(seq);
      if (d == nullptr) {
        throw Error(ErrorCode::FindingsTraceMismatch,
                    "finding refers to seq " + std::to_string(seq) +
                        " which is not in the trace");
      }
      est.per_category_ns[c] += *d;
    }
    all.insert(all.end(), seqs.begin(), seqs.end());
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  for (const std::uint64_t seq : all) {
    est.union_ns += *duration_of(seq);
  }

  if (est.union_ns > est.wall_time_ns) {
    est.warnings.push_back("eliminable time " + std::to_string(est.union_ns) +
                           " ns exceeds wall time; clamped");
    est.union_ns = est.wall_time_ns;
    est.clamped = true;
  }

  if (est.union_ns == 0) {
    est.predicted_speedup = 1.0;
  } else if (est.union_ns == est.wall_time_ns) {
    est.predicted_speedup = std::numeric_limits<double>::infinity();
    est.warnings.push_back(
        "all of the wall time is eliminable; speedup is unbounded");
  } else {
    est.predicted_speedup =
        static_cast<double>(est.wall_time_ns) /
        static_cast<double>(est.wall_time_ns - est.union_ns);
  }

  est.overlapping_events = any_overlap(trace);
  if (est.overlapping_events) {
    est.warnings.push_back(
        "trace has overlapping events; savings assume serial execution and "
        "are potentially unreliable");
  }
  return est;
}

} // namespace dmlens

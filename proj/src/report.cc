#include "dmlens/report.hh"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

namespace dmlens {

namespace {

constexpr const char *kSectionTitles[] = {
    "Duplicate Target Data Transfer Analysis",
    "Round-Trip Target Data Transfer Analysis",
    "Repeated Device Memory Allocation Analysis",
    "Unused Device Memory Allocation Analysis",
    "Unused Data Transfer Analysis",
};

constexpr const char *kJsonCategoryKeys[] = {
    "duplicate_transfers", "round_trip_transfers", "repeated_allocs",
    "unused_allocs", "unused_transfers",
};

std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }

// Calls fn(category, event) once per distinct real event behind the findings,
// in seq order within each category.
template <class Fn> void for_each_finding_event(const Findings &f, Fn fn) {
  std::vector<const TraceEvent *> events;
  auto flush = [&](Category c) {
    std::sort(events.begin(), events.end(),
              [](const TraceEvent *a, const TraceEvent *b) { return a->seq < b->seq; });
    const TraceEvent *prev = nullptr;
    for (const TraceEvent *e : events) {
      if (prev == nullptr || prev->seq != e->seq) {
        fn(c, *e);
      }
      prev = e;
    }
    events.clear();
  };
  auto visit = [&](const TraceEvent &e) {
    if (e.seq != kSyntheticSeq) {
      events.push_back(&e);
    }
  };

  for (const DuplicateGroup &g : f.duplicates) {
    for (const TraceEvent &e : g.events) {
      visit(e);
    }
  }
  flush(Category::DuplicateTransfer);
  for (const RoundTripGroup &g : f.round_trips) {
    for (const RoundTrip &t : g.trips) {
      visit(t.tx_event);
      visit(t.rx_event);
    }
  }
  flush(Category::RoundTrip);
  for (const RepeatedAllocGroup &g : f.repeated_allocs) {
    for (const AllocPair &p : g.pairs) {
      visit(p.alloc_event);
      visit(p.delete_event);
    }
  }
  flush(Category::RepeatedAlloc);
  for (const AllocPair &p : f.unused_allocs) {
    visit(p.alloc_event);
    visit(p.delete_event);
  }
  flush(Category::UnusedAlloc);
  for (const TraceEvent &e : f.unused_transfers) {
    visit(e);
  }
  flush(Category::UnusedTransfer);
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", fraction * 100.0);
  return buf;
}

std::string format_speedup(double speedup) {
  if (std::isinf(speedup)) {
    return "inf";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3fx", speedup);
  return buf;
}

std::string section_summary(Category c, const Findings &f) {
  std::ostringstream os;
  switch (c) {
  case Category::DuplicateTransfer: {
    std::size_t events = 0;
    for (const DuplicateGroup &g : f.duplicates) {
      events += g.events.size();
    }
    os << f.duplicates.size() << " unique hash(es), " << events
       << " transfer(s), " << events - f.duplicates.size() << " redundant";
    break;
  }
  case Category::RoundTrip: {
    std::size_t trips = 0;
    for (const RoundTripGroup &g : f.round_trips) {
      trips += g.trips.size();
    }
    os << f.round_trips.size() << " group(s), " << trips << " round trip(s)";
    break;
  }
  case Category::RepeatedAlloc: {
    std::size_t pairs = 0;
    for (const RepeatedAllocGroup &g : f.repeated_allocs) {
      pairs += g.pairs.size();
    }
    os << f.repeated_allocs.size() << " variable(s), " << pairs
       << " allocation(s)";
    break;
  }
  case Category::UnusedAlloc: {
    const auto synthetic = std::count_if(
        f.unused_allocs.begin(), f.unused_allocs.end(),
        [](const AllocPair &p) { return p.synthetic_delete; });
    os << f.unused_allocs.size() << " allocation(s)";
    if (synthetic > 0) {
      os << ", " << synthetic << " never freed";
    }
    break;
  }
  case Category::UnusedTransfer:
    os << f.unused_transfers.size() << " transfer(s)";
    break;
  }
  return os.str();
}

bool category_empty(Category c, const Findings &f) {
  switch (c) {
  case Category::DuplicateTransfer:
    return f.duplicates.empty();
  case Category::RoundTrip:
    return f.round_trips.empty();
  case Category::RepeatedAlloc:
    return f.repeated_allocs.empty();
  case Category::UnusedAlloc:
    return f.unused_allocs.empty();
  case Category::UnusedTransfer:
    return f.unused_transfers.empty();
  }
  return true;
}

} // namespace

std::string location_label(const CodeLocation &loc) {
  if (loc.file) {
    return *loc.file + ":" + (loc.line ? std::to_string(*loc.line) : "?");
  }
  if (loc.codeptr != 0) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%" PRIx64, loc.codeptr);
    return buf;
  }
  return "<unknown>";
}

std::vector<AttributedIssue> attribute(const Trace &trace,
                                       const Findings &findings) {
  const std::uint64_t wall = trace.wall_time();
  std::array<std::map<std::string, AttributedIssue>, 5> by_location;

  for_each_finding_event(findings, [&](Category c, const TraceEvent &e) {
    std::string label = location_label(e.loc);
    auto [it, inserted] = by_location[index_of(c)].try_emplace(label);
    AttributedIssue &issue = it->second;
    if (inserted) {
      issue.category = c;
      issue.location_label = std::move(label);
      issue.location = e.loc;
      if (!e.loc.file) {
        issue.location.line.reset();
      }
    }
    ++issue.occurrence_count;
    issue.total_ns += e.duration_ns();
    issue.total_bytes += e.bytes;
  });

  std::vector<AttributedIssue> out;
  for (Category c : kAllCategories) {
    std::vector<AttributedIssue> rows;
    for (auto &[label, issue] : by_location[index_of(c)]) {
      issue.pct_of_wall =
          wall == 0 ? 0.0
                    : static_cast<double>(issue.total_ns) / static_cast<double>(wall);
      rows.push_back(std::move(issue));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const AttributedIssue &a, const AttributedIssue &b) {
                       return a.total_ns > b.total_ns;
                     });
    out.insert(out.end(), std::make_move_iterator(rows.begin()),
               std::make_move_iterator(rows.end()));
  }
  return out;
}

std::string render_text([[maybe_unused]] const Trace &trace,
                        const Findings &findings,
                        const SavingsEstimate &savings,
                        const std::vector<AttributedIssue> &issues,
                        const RenderOptions &options) {
  const char *bold = options.color ? "\x1b[1m" : "";
  const char *reset = options.color ? "\x1b[0m" : "";
  std::ostringstream os;
  char row[512];

  for (Category c : kAllCategories) {
    os << bold << "=== " << kSectionTitles[index_of(c)] << " ===" << reset
       << "\n";
    if (category_empty(c, findings)) {
      os << "  (none detected)\n\n";
      continue;
    }
    os << "  " << section_summary(c, findings) << "\n";
    std::snprintf(row, sizeof(row), "%10s %14s %8s %14s  %s\n", "time(%)",
                  "time(ns)", "count", "bytes", "location");
    os << row;
    for (const AttributedIssue &issue : issues) {
      if (issue.category != c) {
        continue;
      }
      std::snprintf(row, sizeof(row), "%10s %14" PRIu64 " %8" PRIu64
                    " %14" PRIu64 "  ",
                    format_percent(issue.pct_of_wall).c_str(), issue.total_ns,
                    issue.occurrence_count, issue.total_bytes);
      os << row << issue.location_label << "\n";
    }
    os << "\n";
  }

  os << bold << "=== Optimization Potential ===" << reset << "\n";
  std::snprintf(row, sizeof(row), "  %-22s %14" PRIu64 "\n", "wall time (ns)",
                savings.wall_time_ns);
  os << row;
  for (Category c : kAllCategories) {
    std::snprintf(row, sizeof(row), "  %-22s %14" PRIu64 "\n",
                  ("eliminable " + std::string(category_code(c)) + " (ns)").c_str(),
                  savings.category_ns(c));
    os << row;
  }
  std::snprintf(row, sizeof(row), "  %-22s %14" PRIu64 "\n",
                "eliminable total (ns)", savings.union_ns);
  os << row;
  std::snprintf(row, sizeof(row), "  %-22s %14zu\n", "eliminable events",
                savings.eliminable_seqs.size());
  os << row;
  const double pct = savings.wall_time_ns == 0
                         ? 0.0
                         : static_cast<double>(savings.union_ns) /
                               static_cast<double>(savings.wall_time_ns);
  std::snprintf(row, sizeof(row), "  %-22s %14s\n", "time(%)",
                format_percent(pct).c_str());
  os << row;
  std::snprintf(row, sizeof(row), "  %-22s %14s\n", "predicted speedup",
                format_speedup(savings.predicted_speedup).c_str());
  os << row;
  for (const std::string &w : savings.warnings) {
    os << "  note: " << w << "\n";
  }
  return os.str();
}

std::string render_json(const Trace &trace, const Findings &findings,
                        const SavingsEstimate &savings,
                        const std::vector<AttributedIssue> &issues) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["report_version"] = 1;
  doc["num_devices"] = trace.num_devices_total;
  doc["host_device"] = trace.host_device;
  doc["wall_time_ns"] = savings.wall_time_ns;

  for (Category c : kAllCategories) {
    ordered_json rows = ordered_json::array();
    for (const AttributedIssue &issue : issues) {
      if (issue.category != c) {
        continue;
      }
      ordered_json row;
      row["location"] = issue.location_label;
      row["codeptr"] = issue.location.codeptr;
      row["file"] = issue.location.file ? ordered_json(*issue.location.file)
                                        : ordered_json(nullptr);
      row["line"] = issue.location.line ? ordered_json(*issue.location.line)
                                        : ordered_json(nullptr);
      row["count"] = issue.occurrence_count;
      row["time_ns"] = issue.total_ns;
      row["bytes"] = issue.total_bytes;
      row["time_fraction"] = issue.pct_of_wall;
      rows.push_back(std::move(row));
    }
    doc[kJsonCategoryKeys[index_of(c)]] = std::move(rows);
  }

  auto seq_or_null = [](const TraceEvent &e) {
    return e.seq == kSyntheticSeq ? ordered_json(nullptr) : ordered_json(e.seq);
  };
  ordered_json groups;
  groups["duplicates"] = ordered_json::array();
  for (const DuplicateGroup &g : findings.duplicates) {
    ordered_json seqs = ordered_json::array();
    for (const TraceEvent &e : g.events) {
      seqs.push_back(e.seq);
    }
    groups["duplicates"].push_back(
        {{"hash", g.key.hash}, {"dest_device", g.key.dest_device}, {"seqs", seqs}});
  }
  groups["round_trips"] = ordered_json::array();
  for (const RoundTripGroup &g : findings.round_trips) {
    ordered_json trips = ordered_json::array();
    for (const RoundTrip &t : g.trips) {
      trips.push_back({t.tx_event.seq, t.rx_event.seq});
    }
    groups["round_trips"].push_back({{"hash", g.key.hash},
                                     {"src_device", g.key.src_device},
                                     {"dest_device", g.key.dest_device},
                                     {"trips", trips}});
  }
  groups["repeated_allocs"] = ordered_json::array();
  for (const RepeatedAllocGroup &g : findings.repeated_allocs) {
    ordered_json pairs = ordered_json::array();
    for (const AllocPair &p : g.pairs) {
      pairs.push_back({p.alloc_event.seq, seq_or_null(p.delete_event)});
    }
    groups["repeated_allocs"].push_back({{"host_addr", g.key.host_addr},
                                         {"tgt_device", g.key.tgt_device},
                                         {"bytes", g.key.bytes},
                                         {"pairs", pairs}});
  }
  groups["unused_allocs"] = ordered_json::array();
  for (const AllocPair &p : findings.unused_allocs) {
    groups["unused_allocs"].push_back(
        {p.alloc_event.seq, seq_or_null(p.delete_event)});
  }
  groups["unused_transfers"] = ordered_json::array();
  for (const TraceEvent &e : findings.unused_transfers) {
    groups["unused_transfers"].push_back(e.seq);
  }
  doc["findings"] = std::move(groups);

  ordered_json s;
  for (Category c : kAllCategories) {
    s["eliminable_ns"][std::string(category_code(c))] = savings.category_ns(c);
  }
  s["union_ns"] = savings.union_ns;
  s["wall_time_ns"] = savings.wall_time_ns;
  s["predicted_speedup"] = std::isinf(savings.predicted_speedup)
                               ? ordered_json(nullptr)
                               : ordered_json(savings.predicted_speedup);
  s["eliminable_seqs"] = savings.eliminable_seqs;
  s["clamped"] = savings.clamped;
  s["potentially_unreliable"] = savings.overlapping_events;
  s["warnings"] = savings.warnings;
  doc["savings"] = std::move(s);

  return doc.dump(2) + "\n";
}

} // namespace dmlens

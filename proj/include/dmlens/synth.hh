#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmlens/trace.hh"

namespace dmlens::synth {

enum class Pattern { Clean, Listing1, Listing2, UnusedAlloc, UnusedTransfer, Mixed };

std::string_view pattern_name(Pattern p);
std::optional<Pattern> pattern_from_name(std::string_view name);

/* Workload description. Device slots are 0..n_devices-1; the host is the
 * last slot, as in OpenMP's device numbering.
 *
 *   clean            one mapping per target device spanning n_iterations kernels
 *   listing1         one array mapped to two consecutive target regions
 *                    (n_iterations is not used)
 *   listing2         a kernel in a loop with implicit mapping of one array
 *   unused_alloc     a scratch buffer mapped and unmapped every iteration with
 *                    no kernel inside the mapping
 *   unused_transfer  a buffer updated twice before each kernel, plus one
 *                    update after the last kernel
 *   mixed            listing1, listing2, unused_alloc and unused_transfer in
 *                    sequence, spread round-robin over the target devices
 */
struct PatternSpec {
  Pattern pattern = Pattern::Clean;
  std::uint32_t n_iterations = 1;
  std::uint64_t bytes_per_array = 4096;
  std::uint32_t n_devices = 2; // including the host
  std::uint64_t seed = 0;
  double transfer_ns_per_byte = 0.25;
  std::uint64_t alloc_ns = 500; // also used for deletes
  std::uint64_t kernel_ns = 20000;
  std::uint64_t jitter_ns = 0; // max extra idle gap before each operation (base gap 1 ns)
  bool mutate_round_trip = false; // listing2: change one byte before re-sending
  bool debug_info = true; // attach file/line to events
  bool keep_payloads = false;
};

struct GroundTruth {
  std::uint64_t dd_groups = 0;
  std::uint64_t dd_events = 0;
  std::uint64_t rt_pairs = 0;
  std::uint64_t ra_groups = 0;
  std::uint64_t ra_pairs = 0;
  std::uint64_t ua_pairs = 0;
  std::uint64_t ut_events = 0;
  std::uint64_t expected_union_savings_ns = 0;

  GroundTruth &operator+=(const GroundTruth &o);
  bool operator==(const GroundTruth &) const = default;
};

struct Generated {
  Trace trace;
  GroundTruth truth;
  std::map<std::uint64_t, std::vector<std::uint8_t>> payloads; // by transfer seq
};

// Throws Error(InvalidSpec).
Generated generate(const PatternSpec &spec);

/* The same workload with the inefficiency fixed. Kept events retain their
 * seq; idle gaps are unchanged, so the wall time shrinks by exactly the
 * durations of the removed events. Throws Error(InvalidSpec) for clean.
 */
Trace optimized_counterpart(const PatternSpec &spec);

struct RandomSpec {
  std::uint64_t seed = 0;
  std::size_t n_events = 100;
  std::uint32_t n_devices = 3;
  bool keep_payloads = false;
};

/* Unstructured trace for differential testing: small pools of payloads,
 * addresses and code locations so that every pattern occurs by chance,
 * overlapping intervals, ties on start time, unmatched deletes and
 * never-freed allocations.
 */
Generated generate_random(const RandomSpec &spec);

} // namespace dmlens::synth

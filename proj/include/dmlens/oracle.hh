#pragma once

#include <string>
#include <vector>

#include "dmlens/detectors.hh"
#include "dmlens/trace.hh"

namespace dmlens::oracle {

/* Brute-force restatements of the four inefficiency definitions, written
 * without reference to the detector code. Quadratic or worse; meant for
 * traces of a few hundred events. Outputs follow the detector contracts so
 * they can be compared seq-for-seq.
 */

std::vector<DuplicateGroup> oracle_duplicates(const Trace &trace);

// Greedy matching: each outbound transfer takes the earliest not yet used
// reception of the same content back at its sender, strictly later in
// (start_ns, seq) order.
std::vector<RoundTripGroup> oracle_round_trips(const Trace &trace);

std::vector<RepeatedAllocGroup> oracle_repeated_allocs(const Trace &trace);

// Mappings on a target device whose lifetime meets no kernel on that device.
std::vector<AllocPair> oracle_unused_allocs(const Trace &trace);

std::vector<TraceEvent> oracle_unused_transfers(const Trace &trace);

Findings oracle_analyze(const Trace &trace);

// One human-readable line per difference, compared as seq sets; empty when
// the two agree.
std::vector<std::string> diff_findings(const Findings &detected,
                                       const Findings &expected);

} // namespace dmlens::oracle

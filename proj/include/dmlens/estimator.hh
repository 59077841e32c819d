#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dmlens/detectors.hh"
#include "dmlens/trace.hh"

namespace dmlens {

enum class Category : std::uint8_t {
  DuplicateTransfer,  // DD
  RoundTrip,          // RT
  RepeatedAlloc,      // RA
  UnusedAlloc,        // UA
  UnusedTransfer,     // UT
};

inline constexpr std::array<Category, 5> kAllCategories = {
    Category::DuplicateTransfer, Category::RoundTrip, Category::RepeatedAlloc,
    Category::UnusedAlloc, Category::UnusedTransfer};

std::string_view category_code(Category c); // "DD", "RT", ...

struct SavingsEstimate {
  std::array<std::uint64_t, 5> per_category_ns{}; // indexed by Category
  std::uint64_t union_ns = 0;
  std::uint64_t wall_time_ns = 0;
  double predicted_speedup = 1.0; // +inf when everything is eliminable
  std::vector<std::uint64_t> eliminable_seqs; // ascending
  bool clamped = false;
  bool overlapping_events = false; // estimate potentially unreliable
  std::vector<std::string> warnings;

  std::uint64_t category_ns(Category c) const {
    return per_category_ns[static_cast<std::size_t>(c)];
  }
};

/* Time saved by removing what the findings mark as avoidable, assuming data
 * operations run serially:
 *
 *   DD  every transfer of a duplicate group except the first
 *   RT  the return leg of every round trip
 *   RA  alloc and delete of every pair after the first in a group
 *   UA  alloc and delete of every unused pair
 *   UT  every unused transfer
 *
 * An event eliminable under several categories counts once in union_ns.
 * Throws Error(FindingsTraceMismatch) if a finding refers to a seq the trace
 * does not contain.
 */
SavingsEstimate estimate(const Trace &trace, const Findings &findings);

} // namespace dmlens

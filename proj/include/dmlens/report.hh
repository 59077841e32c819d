#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmlens/detectors.hh"
#include "dmlens/estimator.hh"
#include "dmlens/trace.hh"

namespace dmlens {

// Findings of one category aggregated at one source location.
struct AttributedIssue {
  Category category;
  CodeLocation location;
  std::string location_label; // "file:line", "0x<codeptr>" or "<unknown>"
  std::uint64_t occurrence_count = 0;
  std::uint64_t total_ns = 0;
  std::uint64_t total_bytes = 0;
  double pct_of_wall = 0.0; // fraction, not percent
};

std::string location_label(const CodeLocation &loc);

/* Groups the distinct events behind each category's findings by source
 * location (file:line when known, else codeptr). Within a category, issues
 * are ordered by total_ns descending, then label. Synthetic deletes are not
 * events and are skipped.
 */
std::vector<AttributedIssue> attribute(const Trace &trace,
                                       const Findings &findings);

struct RenderOptions {
  bool color = false;
};

std::string render_text(const Trace &trace, const Findings &findings,
                        const SavingsEstimate &savings,
                        const std::vector<AttributedIssue> &issues,
                        const RenderOptions &options = {});

// Mirrors render_text. Keys appear in a fixed order; "report_version" is 1.
std::string render_json(const Trace &trace, const Findings &findings,
                        const SavingsEstimate &savings,
                        const std::vector<AttributedIssue> &issues);

} // namespace dmlens

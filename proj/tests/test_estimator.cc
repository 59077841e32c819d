#include <doctest.h>

#include <cmath>

#include "dmlens/detectors.hh"
#include "dmlens/estimator.hh"
#include "dmlens/synth.hh"
#include "support.hh"

using namespace dmlens;
using namespace dmlens::test;

TEST_CASE("no findings") {
  const Trace t = make_trace({kernel(0, 0, 100, 1)});
  const SavingsEstimate s = estimate(t, Findings{});
  CHECK(s.union_ns == 0);
  CHECK(s.predicted_speedup == 1.0);
  CHECK(s.eliminable_seqs.empty());
  CHECK(s.warnings.empty());
}

TEST_CASE("one redundant 10 ns transfer in 100 ns") {
  const Trace t = make_trace({transfer(0, 0, 10, 0, 1, 0xaa), kernel(1, 10, 40, 1),
                              transfer(2, 40, 50, 0, 1, 0xaa), kernel(3, 50, 100, 1)});
  const SavingsEstimate s = estimate(t, analyze(t));
  CHECK(s.wall_time_ns == 100);
  CHECK(s.category_ns(Category::DuplicateTransfer) == 10);
  CHECK(s.union_ns == 10);
  CHECK(s.predicted_speedup == doctest::Approx(100.0 / 90.0).epsilon(1e-12));
  CHECK(s.eliminable_seqs == std::vector<std::uint64_t>{2});
}

TEST_CASE("event in two categories counts once") {
  // The second transfer repeats the first and arrives after the last kernel.
  const Trace t = make_trace({transfer(0, 0, 10, 0, 1, 0xaa), kernel(1, 20, 30, 1),
                              transfer(2, 40, 50, 0, 1, 0xaa)});
  const Findings f = analyze(t);
  REQUIRE(f.duplicates.size() == 1);
  REQUIRE(f.unused_transfers.size() == 1);
  const SavingsEstimate s = estimate(t, f);
  CHECK(s.category_ns(Category::DuplicateTransfer) == 10);
  CHECK(s.category_ns(Category::UnusedTransfer) == 10);
  CHECK(s.union_ns == 10);
}

TEST_CASE("repeated allocation keeps the first mapping") {
  const Trace t = make_trace({alloc(0, 0, 3, 1, 0xa0), kernel(1, 3, 10, 1),
                              release(2, 10, 12, 1, 0xa0), alloc(3, 20, 25, 1, 0xa0),
                              kernel(4, 25, 40, 1), release(5, 40, 47, 1, 0xa0)});
  const SavingsEstimate s = estimate(t, analyze(t));
  CHECK(s.category_ns(Category::RepeatedAlloc) == 5 + 7);
  CHECK(s.eliminable_seqs == std::vector<std::uint64_t>{3, 5});
}

TEST_CASE("synthetic deletes contribute nothing") {
  // Never-freed mapping with no kernel: unused, but only the alloc is real.
  const Trace t = make_trace({kernel(0, 0, 10, 1), alloc(1, 20, 26, 1, 0xa0),
                              kernel(2, 30, 40, 2)});
  const Findings f = analyze(t);
  REQUIRE(f.unused_allocs.size() == 1);
  CHECK(f.unused_allocs[0].synthetic_delete);
  const SavingsEstimate s = estimate(t, f);
  CHECK(s.union_ns == 6);
  CHECK(s.eliminable_seqs == std::vector<std::uint64_t>{1});
}

TEST_CASE("round trip saves the return leg") {
  const Trace t = make_trace({transfer(0, 0, 10, 1, 0, 0xaa), kernel(1, 10, 30, 1),
                              transfer(2, 30, 34, 0, 1, 0xaa), kernel(3, 34, 50, 1)});
  const SavingsEstimate s = estimate(t, analyze(t));
  CHECK(s.category_ns(Category::RoundTrip) == 4);
  CHECK(s.eliminable_seqs == std::vector<std::uint64_t>{2});
}

TEST_CASE("finding not in trace") {
  const Trace t = make_trace({kernel(0, 0, 10, 1)});
  Findings f;
  f.unused_transfers.push_back(transfer(99, 0, 5, 0, 1, 0xaa));
  try {
    estimate(t, f);
    FAIL("accepted");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::FindingsTraceMismatch);
  }
}

TEST_CASE("everything eliminable") {
  const Trace t = make_trace({alloc(0, 0, 5, 1, 0xa0), release(1, 5, 10, 1, 0xa0)});
  const SavingsEstimate s = estimate(t, analyze(t));
  CHECK(s.union_ns == 10);
  CHECK(std::isinf(s.predicted_speedup));
  CHECK_FALSE(s.warnings.empty());
}

TEST_CASE("savings beyond the recorded wall time are clamped") {
  Trace t = make_trace({alloc(0, 0, 5, 1, 0xa0), release(1, 5, 10, 1, 0xa0),
                        kernel(2, 20, 30, 1)});
  t.wall_time_ns = 8;
  const SavingsEstimate s = estimate(t, analyze(t));
  CHECK(s.clamped);
  CHECK(s.union_ns == 8);
  CHECK(std::isinf(s.predicted_speedup));
}

TEST_CASE("overlapping events flag the estimate") {
  const Trace serial = make_trace({kernel(0, 0, 10, 1), kernel(1, 10, 20, 1)});
  CHECK_FALSE(estimate(serial, Findings{}).overlapping_events);
  const Trace overlapped = make_trace({kernel(0, 0, 10, 1), kernel(1, 5, 20, 2)});
  const SavingsEstimate s = estimate(overlapped, Findings{});
  CHECK(s.overlapping_events);
  CHECK(s.warnings.size() == 1);
}

TEST_CASE("union is bounded by the category sum and grows with findings") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    synth::RandomSpec spec;
    spec.seed = seed;
    spec.n_events = 200;
    const Trace t = synth::generate_random(spec).trace;
    Findings f = analyze(t);
    const SavingsEstimate full = estimate(t, f);
    std::uint64_t sum = 0;
    for (std::uint64_t v : full.per_category_ns) {
      sum += v;
    }
    if (!full.clamped) {
      CHECK(full.union_ns <= sum);
    }
    CHECK(full.union_ns <= full.wall_time_ns);

    while (!f.empty()) {
      if (!f.duplicates.empty()) {
        f.duplicates.pop_back();
      } else if (!f.round_trips.empty()) {
        f.round_trips.pop_back();
      } else if (!f.repeated_allocs.empty()) {
        f.repeated_allocs.pop_back();
      } else if (!f.unused_allocs.empty()) {
        f.unused_allocs.pop_back();
      } else {
        f.unused_transfers.pop_back();
      }
      CHECK(estimate(t, f).union_ns <= full.union_ns);
    }
  }
}

TEST_CASE("category codes") {
  CHECK(category_code(Category::DuplicateTransfer) == "DD");
  CHECK(category_code(Category::RoundTrip) == "RT");
  CHECK(category_code(Category::RepeatedAlloc) == "RA");
  CHECK(category_code(Category::UnusedAlloc) == "UA");
  CHECK(category_code(Category::UnusedTransfer) == "UT");
}

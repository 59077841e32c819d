#include <doctest.h>

#include <map>

#include "dmlens/event_prep.hh"
#include "dmlens/synth.hh"
#include "support.hh"

using namespace dmlens;
using namespace dmlens::test;

TEST_CASE("alloc then delete is one pair") {
  const Trace t = make_trace({alloc(0, 0, 1, 1, 0xa0), release(1, 5, 6, 1, 0xa0)});
  const auto pairs = get_alloc_delete_pairs(t.events);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].alloc_event.seq == 0);
  CHECK(pairs[0].delete_event.seq == 1);
  CHECK_FALSE(pairs[0].synthetic_delete);
}

TEST_CASE("nested mappings pair most recent first") {
  const Trace t = make_trace({alloc(1, 0, 1, 1, 0xa0), alloc(2, 2, 3, 1, 0xa0),
                              release(3, 4, 5, 1, 0xa0), release(4, 6, 7, 1, 0xa0)});
  const auto pairs = get_alloc_delete_pairs(t.events);
  REQUIRE(pairs.size() == 2);
  std::map<std::uint64_t, std::uint64_t> partner;
  for (const AllocPair &p : pairs) {
    partner[p.alloc_event.seq] = p.delete_event.seq;
  }
  CHECK(partner[2] == 3);
  CHECK(partner[1] == 4);
}

TEST_CASE("never-freed allocation gets a synthetic delete at the horizon") {
  const Trace t = make_trace({alloc(0, 10, 20, 1, 0xa0), kernel(1, 30, 100, 1)});
  const auto pairs = get_alloc_delete_pairs(t.events);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].synthetic_delete);
  CHECK(pairs[0].delete_event.seq == kSyntheticSeq);
  CHECK(pairs[0].delete_event.start_ns == 100);
  CHECK(pairs[0].delete_event.end_ns == 100);

  const auto explicit_horizon = get_alloc_delete_pairs(t.events, 500);
  CHECK(explicit_horizon[0].delete_event.end_ns == 500);
}

TEST_CASE("unmatched delete is dropped with a warning") {
  const Trace t = make_trace({release(7, 0, 1, 1, 0xa0), alloc(8, 2, 3, 1, 0xa0),
                              release(9, 4, 5, 2, 0xa0)});
  std::vector<PrepWarning> warnings;
  const auto pairs = get_alloc_delete_pairs(t.events, std::nullopt, &warnings);
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[0].seq == 7);
  CHECK(warnings[1].seq == 9);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].synthetic_delete);
}

TEST_CASE("pairs are keyed by device as well as address") {
  const Trace t = make_trace({alloc(0, 0, 1, 1, 0xa0), alloc(1, 2, 3, 2, 0xa0),
                              release(2, 4, 5, 1, 0xa0), release(3, 6, 7, 2, 0xa0)});
  const auto pairs = get_alloc_delete_pairs(t.events);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].delete_event.seq == 2);
  CHECK(pairs[1].delete_event.seq == 3);
}

TEST_CASE("pairing conservation on generated traces") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    synth::RandomSpec spec;
    spec.seed = seed;
    spec.n_events = 150;
    const Trace t = synth::generate_random(spec).trace;
    std::vector<PrepWarning> warnings;
    const auto pairs = get_alloc_delete_pairs(t.events, std::nullopt, &warnings);

    std::size_t allocs = 0;
    std::size_t deletes = 0;
    for (const TraceEvent &e : t.events) {
      allocs += e.kind == EventKind::Alloc;
      deletes += e.kind == EventKind::Delete;
    }
    std::size_t real_deletes = 0;
    for (const AllocPair &p : pairs) {
      real_deletes += !p.synthetic_delete;
      CHECK(p.alloc_event.dst_device == p.delete_event.dst_device);
      CHECK(p.alloc_event.dst_addr == p.delete_event.dst_addr);
      CHECK_FALSE(chrono_less(p.delete_event, p.alloc_event));
    }
    CHECK(pairs.size() == allocs);
    CHECK(real_deletes + warnings.size() == deletes);

    std::vector<const TraceEvent *> ptrs;
    for (const TraceEvent &e : t.events) {
      ptrs.push_back(&e);
    }
    CHECK(get_alloc_delete_pairs(std::span<const TraceEvent *const>(ptrs)) == pairs);
  }
}

TEST_CASE("sort_by_device") {
  SUBCASE("empty input") {
    const auto out = sort_by_device({}, 4, DeviceKey::Dst);
    CHECK(out.size() == 4);
    for (const auto &v : out) {
      CHECK(v.empty());
    }
  }
  SUBCASE("partition by destination") {
    const Trace t = make_trace({kernel(0, 0, 1, 1), kernel(1, 1, 2, 2),
                                kernel(2, 2, 3, 1), kernel(3, 3, 4, 2),
                                kernel(4, 4, 5, 1)});
    const auto out = sort_by_device(t.events, 3, DeviceKey::Dst);
    CHECK(out[0].empty());
    CHECK(seqs(out[1]) == std::vector<std::uint64_t>{0, 2, 4});
    CHECK(seqs(out[2]) == std::vector<std::uint64_t>{1, 3});
  }
  SUBCASE("source key") {
    const Trace t = make_trace({transfer(0, 0, 1, 2, 1, 5)});
    CHECK(sort_by_device(t.events, 3, DeviceKey::Src)[2].size() == 1);
  }
  SUBCASE("out of range") {
    const Trace t = make_trace({kernel(0, 0, 1, 3)});
    try {
      sort_by_device(t.events, 3, DeviceKey::Dst);
      FAIL("accepted");
    } catch (const Error &e) {
      CHECK(e.code() == ErrorCode::DeviceOutOfRange);
    }
  }
  SUBCASE("partition property on generated traces") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      synth::RandomSpec spec;
      spec.seed = seed;
      spec.n_events = 120;
      spec.n_devices = 4;
      const Trace t = synth::generate_random(spec).trace;
      const auto out = sort_by_device(t.events, 4, DeviceKey::Dst);
      std::vector<TraceEvent> joined;
      for (std::size_t d = 0; d < out.size(); ++d) {
        for (const TraceEvent &e : out[d]) {
          CHECK(e.dst_device == d);
        }
        CHECK(std::is_sorted(out[d].begin(), out[d].end(), chrono_less));
        joined.insert(joined.end(), out[d].begin(), out[d].end());
      }
      std::sort(joined.begin(), joined.end(), chrono_less);
      CHECK(joined == t.events);
    }
  }
}

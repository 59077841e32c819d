#include "dmlens/synth.hh"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <utility>

#include "dmlens/hashing.hh"

namespace dmlens::synth {

namespace {

constexpr std::array<std::pair<Pattern, std::string_view>, 6> kNames = {{
    {Pattern::Clean, "clean"},
    {Pattern::Listing1, "listing1"},
    {Pattern::Listing2, "listing2"},
    {Pattern::UnusedAlloc, "unused_alloc"},
    {Pattern::UnusedTransfer, "unused_transfer"},
    {Pattern::Mixed, "mixed"},
}};

std::uint64_t splitmix64(std::uint64_t &state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Tag in the leading bytes keeps distinct tags distinct whenever they fit.
std::vector<std::uint8_t> make_payload(std::uint64_t seed, std::uint64_t tag,
                                       std::uint64_t bytes, bool mutated) {
  std::vector<std::uint8_t> out(bytes);
  std::uint64_t state = seed * 0x2545f4914f6cdd1dULL ^ tag;
  for (std::size_t i = 0; i < out.size(); i += 8) {
    std::uint64_t word = splitmix64(state);
    for (std::size_t j = 0; j < 8 && i + j < out.size(); ++j) {
      out[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
    }
  }
  for (std::size_t j = 0; j < 8 && j < out.size(); ++j) {
    out[j] = static_cast<std::uint8_t>(tag >> (8 * j));
  }
  if (mutated) {
    out.back() ^= 0x01;
  }
  return out;
}

enum class Phase : std::uint64_t { Entry = 0x0, Exit = 0x10, Kernel = 0x20 };

struct Content {
  std::uint64_t tag = 0;
  bool mutated = false;

  bool operator==(const Content &) const = default;
};

struct Op {
  TraceEvent ev; // seq and times are assigned at layout
  std::uint64_t duration = 0;
  std::optional<Content> content;
  bool removable = false;
};

class Builder {
public:
  explicit Builder(const PatternSpec &spec)
      : spec_(spec), host_(spec.n_devices - 1),
        stride_(((spec.bytes_per_array + 0xfff) & ~std::uint64_t{0xfff}) +
                0x1000) {}

  DeviceNum host() const { return host_; }

  std::uint64_t new_var() { return ++vars_; }
  std::uint64_t new_tag() { return ++tags_; }

  // A source construct; its code pointers differ per phase.
  struct Construct {
    std::uint64_t base;
    std::string file;
    std::uint32_t line;
  };
  Construct construct(std::string_view file, std::uint32_t line) {
    ++constructs_;
    return {0x401000 + constructs_ * 0x40, std::string(file), line};
  }

  std::uint64_t host_addr(std::uint64_t var) const {
    return 0x10000000 + var * stride_;
  }
  std::uint64_t dev_addr(DeviceNum dev, std::uint64_t var) const {
    return 0x7f0000000000ULL + dev * 0x1000000000ULL + var * stride_;
  }

  void alloc(const Construct &c, DeviceNum dev, std::uint64_t var,
             std::uint64_t bytes, bool removable = false) {
    Op op = base(c, Phase::Entry, EventKind::Alloc, removable);
    op.ev.src_device = host_;
    op.ev.dst_device = dev;
    op.ev.src_addr = host_addr(var);
    op.ev.dst_addr = dev_addr(dev, var);
    op.ev.bytes = bytes;
    op.duration = spec_.alloc_ns;
    ops_.push_back(std::move(op));
  }

  void release(const Construct &c, DeviceNum dev, std::uint64_t var,
               bool removable = false) {
    Op op = base(c, Phase::Exit, EventKind::Delete, removable);
    op.ev.src_device = host_;
    op.ev.dst_device = dev;
    op.ev.src_addr = host_addr(var);
    op.ev.dst_addr = dev_addr(dev, var);
    op.duration = spec_.alloc_ns;
    ops_.push_back(std::move(op));
  }

  void to_device(const Construct &c, DeviceNum dev, std::uint64_t var,
                 std::uint64_t bytes, Content content, bool removable = false) {
    Op op = base(c, Phase::Entry, EventKind::Transfer, removable);
    op.ev.src_device = host_;
    op.ev.dst_device = dev;
    op.ev.src_addr = host_addr(var);
    op.ev.dst_addr = dev_addr(dev, var);
    finish_transfer(op, bytes, content);
  }

  void from_device(const Construct &c, DeviceNum dev, std::uint64_t var,
                   std::uint64_t bytes, Content content,
                   bool removable = false) {
    Op op = base(c, Phase::Exit, EventKind::Transfer, removable);
    op.ev.src_device = dev;
    op.ev.dst_device = host_;
    op.ev.src_addr = dev_addr(dev, var);
    op.ev.dst_addr = host_addr(var);
    finish_transfer(op, bytes, content);
  }

  void kernel(const Construct &c, DeviceNum dev) {
    Op op = base(c, Phase::Kernel, EventKind::Kernel, false);
    op.ev.src_device = dev;
    op.ev.dst_device = dev;
    op.duration = spec_.kernel_ns;
    ops_.push_back(std::move(op));
  }

  std::uint64_t removed_ns() const {
    std::uint64_t total = 0;
    for (const Op &op : ops_) {
      if (op.removable) {
        total += op.duration;
      }
    }
    return total;
  }

  Generated layout(bool keep_removed) const;

private:
  Op base(const Construct &c, Phase phase, EventKind kind, bool removable) {
    Op op;
    op.ev.kind = kind;
    op.ev.loc.codeptr = c.base + static_cast<std::uint64_t>(phase);
    if (spec_.debug_info) {
      op.ev.loc.file = c.file;
      op.ev.loc.line = c.line;
    }
    op.removable = removable;
    return op;
  }

  void finish_transfer(Op &op, std::uint64_t bytes, Content content) {
    op.ev.bytes = bytes;
    op.content = content;
    op.duration = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(
               std::ceil(static_cast<double>(bytes) * spec_.transfer_ns_per_byte)));
    ops_.push_back(std::move(op));
  }

  const PatternSpec &spec_;
  DeviceNum host_;
  std::uint64_t stride_;
  std::uint64_t vars_ = 0;
  std::uint64_t tags_ = 0;
  std::uint64_t constructs_ = 0;
  std::vector<Op> ops_;
};

struct ContentHasher {
  std::size_t operator()(const Content &c) const {
    return std::hash<std::uint64_t>{}(c.tag * 2 + (c.mutated ? 1 : 0));
  }
};

Generated Builder::layout(bool keep_removed) const {
  Generated out;
  out.trace.num_devices_total = spec_.n_devices;
  out.trace.host_device = host_;
  out.trace.events.reserve(ops_.size());

  std::unordered_map<Content, std::uint64_t, ContentHasher> hash_of;
  std::unordered_map<std::uint64_t, Content> owner;
  std::mt19937_64 rng(spec_.seed);
  std::uint64_t cursor = 1000;

  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op &op = ops_[i];
    // Draw the gap even for skipped ops so both variants share the schedule.
    // At least 1 ns so neighbouring events never touch.
    const std::uint64_t gap =
        1 + (spec_.jitter_ns == 0 ? 0 : rng() % (spec_.jitter_ns + 1));
    if (!keep_removed && op.removable) {
      cursor += gap;
      continue;
    }
    TraceEvent ev = op.ev;
    ev.seq = i;
    ev.start_ns = cursor + gap;
    ev.end_ns = ev.start_ns + op.duration;
    cursor = ev.end_ns;

    if (op.content) {
      const Content c = *op.content;
      auto it = hash_of.find(c);
      std::vector<std::uint8_t> payload;
      if (it == hash_of.end() || spec_.keep_payloads) {
        payload = make_payload(spec_.seed, c.tag, ev.bytes, c.mutated);
      }
      if (it == hash_of.end()) {
        const std::uint64_t h = hash_bytes(as_bytes_view(payload)).value();
        auto [o, fresh] = owner.emplace(h, c);
        if (!fresh && !(o->second == c)) {
          throw Error(ErrorCode::InvalidSpec,
                      "bytes_per_array too small to keep payloads distinct");
        }
        it = hash_of.emplace(c, h).first;
      }
      ev.hash = it->second;
      if (spec_.keep_payloads) {
        out.payloads.emplace(ev.seq, std::move(payload));
      }
    }
    out.trace.events.push_back(std::move(ev));
  }
  return out;
}

constexpr std::uint64_t kScalarBytes = 8;

/* int a[N]; int sum = 0, prod = 1;
 * #pragma omp target map(to: a) map(tofrom: sum)     // line 3
 * #pragma omp target map(to: a) map(tofrom: prod)    // line 7
 */
GroundTruth build_listing1(Builder &b, const PatternSpec &spec, DeviceNum dev) {
  const std::uint64_t a = b.new_var();
  const std::uint64_t a_tag = b.new_tag();
  const std::uint64_t n = spec.bytes_per_array;

  for (int region = 0; region < 2; ++region) {
    const auto c = b.construct("listing1.c", region == 0 ? 3 : 7);
    const std::uint64_t s = b.new_var();
    const std::uint64_t in_tag = b.new_tag();
    const std::uint64_t out_tag = b.new_tag();
    b.alloc(c, dev, a, n, region == 1);
    b.to_device(c, dev, a, n, {a_tag}, region == 1);
    b.alloc(c, dev, s, kScalarBytes);
    b.to_device(c, dev, s, kScalarBytes, {in_tag});
    b.kernel(c, dev);
    b.from_device(c, dev, s, kScalarBytes, {out_tag});
    b.release(c, dev, s);
    b.release(c, dev, a, region == 0);
  }
  GroundTruth t;
  t.dd_groups = 1;
  t.dd_events = 2;
  t.ra_groups = 1;
  t.ra_pairs = 2;
  return t;
}

/* for (i = 0; i < N; ++i)
 *   #pragma omp target        // line 4, a mapped tofrom implicitly
 */
GroundTruth build_listing2(Builder &b, const PatternSpec &spec, DeviceNum dev) {
  const std::uint32_t n_iter = spec.n_iterations;
  const std::uint64_t n = spec.bytes_per_array;
  const std::uint64_t a = b.new_var();
  const auto c = b.construct("listing2.c", 4);
  std::uint64_t current = b.new_tag();

  for (std::uint32_t i = 0; i < n_iter; ++i) {
    const bool later = i > 0;
    const bool mutate = later && spec.mutate_round_trip;
    b.alloc(c, dev, a, n, later);
    b.to_device(c, dev, a, n, {current, mutate}, later && !mutate);
    b.kernel(c, dev);
    const std::uint64_t next = b.new_tag();
    b.from_device(c, dev, a, n, {next});
    // The final delete stays; each earlier one merges into the last mapping.
    b.release(c, dev, a, i + 1 < n_iter);
    current = next;
  }
  GroundTruth t;
  t.rt_pairs = spec.mutate_round_trip || n_iter == 0 ? 0 : n_iter - 1;
  t.ra_groups = n_iter >= 2 ? 1 : 0;
  t.ra_pairs = n_iter >= 2 ? n_iter : 0;
  return t;
}

/* #pragma omp target data map(tofrom: a)
 * for (i = 0; i < N; ++i) {
 *   #pragma omp target enter/exit data map(alloc: b)   // line 5, never used
 *   #pragma omp target                                   // line 6
 * }
 */
GroundTruth build_unused_alloc(Builder &b, const PatternSpec &spec,
                               DeviceNum dev) {
  const std::uint64_t n = spec.bytes_per_array;
  const std::uint64_t a = b.new_var();
  const std::uint64_t scratch = b.new_var();
  const auto outer = b.construct("unused_alloc.c", 2);
  const auto map_b = b.construct("unused_alloc.c", 5);
  const auto region = b.construct("unused_alloc.c", 6);

  b.alloc(outer, dev, a, n);
  b.to_device(outer, dev, a, n, {b.new_tag()});
  for (std::uint32_t i = 0; i < spec.n_iterations; ++i) {
    b.alloc(map_b, dev, scratch, n, true);
    b.release(map_b, dev, scratch, true);
    b.kernel(region, dev);
  }
  b.from_device(outer, dev, a, n, {b.new_tag()});
  b.release(outer, dev, a);

  GroundTruth t;
  t.ua_pairs = spec.n_iterations;
  t.ra_groups = spec.n_iterations >= 2 ? 1 : 0;
  t.ra_pairs = spec.n_iterations >= 2 ? spec.n_iterations : 0;
  return t;
}

/* #pragma omp target data map(tofrom: a) map(alloc: x)
 * for (i = 0; i < N; ++i) {
 *   #pragma omp target update to(x)     // line 5, overwritten before use
 *   #pragma omp target update to(x)     // line 6
 *   #pragma omp target                  // line 7
 * }
 * #pragma omp target update to(x)       // line 9, never used
 */
GroundTruth build_unused_transfer(Builder &b, const PatternSpec &spec,
                                  DeviceNum dev) {
  const std::uint64_t n = spec.bytes_per_array;
  const std::uint64_t a = b.new_var();
  const std::uint64_t x = b.new_var();
  const auto outer = b.construct("unused_transfer.c", 2);
  const auto first = b.construct("unused_transfer.c", 5);
  const auto second = b.construct("unused_transfer.c", 6);
  const auto region = b.construct("unused_transfer.c", 7);
  const auto tail = b.construct("unused_transfer.c", 9);

  b.alloc(outer, dev, a, n);
  b.to_device(outer, dev, a, n, {b.new_tag()});
  b.alloc(outer, dev, x, n);
  for (std::uint32_t i = 0; i < spec.n_iterations; ++i) {
    b.to_device(first, dev, x, n, {b.new_tag()}, true);
    b.to_device(second, dev, x, n, {b.new_tag()});
    b.kernel(region, dev);
  }
  b.to_device(tail, dev, x, n, {b.new_tag()}, true);
  b.from_device(outer, dev, a, n, {b.new_tag()});
  b.release(outer, dev, x);
  b.release(outer, dev, a);

  GroundTruth t;
  t.ut_events = spec.n_iterations + 1;
  return t;
}

void build_clean(Builder &b, const PatternSpec &spec) {
  const auto c = b.construct("clean.c", 2);
  const auto region = b.construct("clean.c", 4);
  const std::uint64_t n = spec.bytes_per_array;
  for (DeviceNum dev = 0; dev < b.host(); ++dev) {
    const std::uint64_t a = b.new_var();
    b.alloc(c, dev, a, n);
    b.to_device(c, dev, a, n, {b.new_tag()});
    for (std::uint32_t i = 0; i < spec.n_iterations; ++i) {
      b.kernel(region, dev);
    }
    b.from_device(c, dev, a, n, {b.new_tag()});
    b.release(c, dev, a);
  }
}

void check(const PatternSpec &spec) {
  if (spec.n_devices < 2) {
    throw Error(ErrorCode::InvalidSpec,
                "n_devices must be at least 2 (one target plus the host)");
  }
  if (spec.bytes_per_array == 0) {
    throw Error(ErrorCode::InvalidSpec, "bytes_per_array must be positive");
  }
  if (spec.pattern != Pattern::Listing1 && spec.n_iterations == 0) {
    throw Error(ErrorCode::InvalidSpec, "n_iterations must be positive");
  }
  if (!(spec.transfer_ns_per_byte >= 0.0) ||
      !std::isfinite(spec.transfer_ns_per_byte)) {
    throw Error(ErrorCode::InvalidSpec,
                "transfer_ns_per_byte must be finite and non-negative");
  }
}

Builder build(const PatternSpec &spec, GroundTruth &truth) {
  check(spec);
  Builder b(spec);
  const DeviceNum targets = spec.n_devices - 1;
  switch (spec.pattern) {
  case Pattern::Clean:
    build_clean(b, spec);
    break;
  case Pattern::Listing1:
    truth = build_listing1(b, spec, 0);
    break;
  case Pattern::Listing2:
    truth = build_listing2(b, spec, 0);
    break;
  case Pattern::UnusedAlloc:
    truth = build_unused_alloc(b, spec, 0);
    break;
  case Pattern::UnusedTransfer:
    truth = build_unused_transfer(b, spec, 0);
    break;
  case Pattern::Mixed:
    truth += build_listing1(b, spec, 0);
    truth += build_listing2(b, spec, 1 % targets);
    truth += build_unused_alloc(b, spec, 2 % targets);
    truth += build_unused_transfer(b, spec, 3 % targets);
    break;
  }
  truth.expected_union_savings_ns = b.removed_ns();
  return b;
}

} // namespace

std::string_view pattern_name(Pattern p) {
  for (const auto &[pattern, name] : kNames) {
    if (pattern == p) {
      return name;
    }
  }
  return "?";
}

std::optional<Pattern> pattern_from_name(std::string_view name) {
  for (const auto &[pattern, n] : kNames) {
    if (n == name) {
      return pattern;
    }
  }
  return std::nullopt;
}

GroundTruth &GroundTruth::operator+=(const GroundTruth &o) {
  dd_groups += o.dd_groups;
  dd_events += o.dd_events;
  rt_pairs += o.rt_pairs;
  ra_groups += o.ra_groups;
  ra_pairs += o.ra_pairs;
  ua_pairs += o.ua_pairs;
  ut_events += o.ut_events;
  expected_union_savings_ns += o.expected_union_savings_ns;
  return *this;
}

Generated generate(const PatternSpec &spec) {
  GroundTruth truth;
  const Builder b = build(spec, truth);
  Generated out = b.layout(true);
  out.truth = truth;
  return out;
}

Trace optimized_counterpart(const PatternSpec &spec) {
  if (spec.pattern == Pattern::Clean) {
    throw Error(ErrorCode::InvalidSpec,
                "the clean pattern has no optimized counterpart");
  }
  GroundTruth truth;
  const Builder b = build(spec, truth);
  return b.layout(false).trace;
}

Generated generate_random(const RandomSpec &spec) {
  if (spec.n_devices < 1) {
    throw Error(ErrorCode::InvalidSpec, "n_devices must be positive");
  }
  std::mt19937_64 rng(spec.seed);
  auto pick = [&](std::uint64_t n) { return rng() % n; };
  auto chance = [&](unsigned percent) { return pick(100) < percent; };

  const std::size_t n = spec.n_events;
  const std::uint32_t nd = spec.n_devices;
  const DeviceNum host = static_cast<DeviceNum>(pick(nd));
  auto target = [&]() -> DeviceNum {
    if (nd == 1 || chance(10)) {
      return static_cast<DeviceNum>(pick(nd));
    }
    DeviceNum d = static_cast<DeviceNum>(pick(nd - 1));
    return d >= host ? d + 1 : d;
  };

  auto pool_size = [&](std::size_t div, std::size_t lo) {
    return std::clamp<std::size_t>(n / div, lo, std::size_t{1} << 22);
  };
  const std::size_t n_payloads = pool_size(8, 4);
  const std::size_t n_host_addrs = pool_size(16, 3);
  const std::size_t n_dev_addrs = pool_size(16, 3);

  struct Payload {
    std::vector<std::uint8_t> bytes;
    std::uint64_t hash;
  };
  std::vector<Payload> payloads(n_payloads);
  for (std::size_t i = 0; i < n_payloads; ++i) {
    const std::uint64_t size = 16 + pick(49);
    payloads[i].bytes = make_payload(spec.seed, i + 1, size, false);
    payloads[i].hash = hash_bytes(as_bytes_view(payloads[i].bytes)).value();
  }
  auto host_addr = [&]() { return 0x10000000 + pick(n_host_addrs) * 0x100; };
  auto dev_addr = [&]() { return 0x7f0000000000ULL + pick(n_dev_addrs) * 0x100; };
  constexpr std::array<std::uint64_t, 3> kAllocSizes = {64, 128, 256};

  std::vector<std::uint64_t> seqs(n);
  std::iota(seqs.begin(), seqs.end(), 0);
  std::shuffle(seqs.begin(), seqs.end(), rng);

  Generated out;
  out.trace.num_devices_total = nd;
  out.trace.host_device = host;
  out.trace.events.reserve(n);
  std::vector<std::pair<DeviceNum, std::uint64_t>> live;
  std::uint64_t clock = 1000;

  for (std::size_t i = 0; i < n; ++i) {
    TraceEvent e;
    e.seq = seqs[i];
    e.start_ns = clock;
    clock += pick(40);
    e.end_ns = e.start_ns + pick(100);
    if (!chance(10)) {
      e.loc.codeptr = 0x400000 + pick(8) * 0x10;
      if (chance(30)) {
        e.loc.file = "rand.c";
        e.loc.line = static_cast<std::uint32_t>(1 + pick(8));
      }
    }

    const std::uint64_t roll = pick(100);
    if (roll < 45) {
      e.kind = EventKind::Transfer;
      const std::uint64_t dir = pick(100);
      if (dir < 45) {
        e.src_device = host;
        e.dst_device = target();
      } else if (dir < 90) {
        e.src_device = target();
        e.dst_device = host;
      } else {
        e.src_device = static_cast<DeviceNum>(pick(nd));
        e.dst_device = static_cast<DeviceNum>(pick(nd));
      }
      e.src_addr = e.src_device == host ? host_addr() : dev_addr();
      e.dst_addr = e.dst_device == host ? host_addr() : dev_addr();
      if (!chance(5)) {
        const Payload &p = payloads[pick(n_payloads)];
        e.bytes = p.bytes.size();
        e.hash = p.hash;
        if (spec.keep_payloads) {
          out.payloads.emplace(e.seq, p.bytes);
        }
      }
    } else if (roll < 65) {
      e.kind = EventKind::Alloc;
      e.src_device = host;
      e.dst_device = target();
      e.src_addr = host_addr();
      e.dst_addr = dev_addr();
      e.bytes = kAllocSizes[pick(kAllocSizes.size())];
      live.emplace_back(e.dst_device, e.dst_addr);
    } else if (roll < 80) {
      e.kind = EventKind::Delete;
      e.src_device = host;
      if (!live.empty() && !chance(20)) {
        const std::size_t k = pick(live.size());
        std::tie(e.dst_device, e.dst_addr) = live[k];
        live[k] = live.back();
        live.pop_back();
      } else {
        e.dst_device = target();
        e.dst_addr = dev_addr();
      }
    } else {
      e.kind = EventKind::Kernel;
      e.dst_device = target();
      e.src_device = e.dst_device;
    }
    out.trace.events.push_back(std::move(e));
  }
  std::sort(out.trace.events.begin(), out.trace.events.end(), chrono_less);
  return out;
}

} // namespace dmlens::synth

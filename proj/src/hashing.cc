#include "dmlens/hashing.hh"

#include <algorithm>
#include <bit>
#include <cstring>
#include <stdexcept>

#include "dmlens/trace.hh"

namespace dmlens {

namespace {

constexpr std::uint64_t kPrime1 = 0x9E3779B185EBCA87ull;
constexpr std::uint64_t kPrime2 = 0xC2B2AE3D27D4EB4Full;
constexpr std::uint64_t kPrime3 = 0x165667B19E3779F9ull;
constexpr std::uint64_t kPrime4 = 0x85EBCA77C2B2AE63ull;
constexpr std::uint64_t kPrime5 = 0x27D4EB2F165667C5ull;

std::uint64_t read64(const std::byte *p) {
  std::uint64_t v;
  std::memcpy(&v, p, sizeof(v));
  if constexpr (std::endian::native == std::endian::big) {
    v = __builtin_bswap64(v);
  }
  return v;
}

std::uint32_t read32(const std::byte *p) {
  std::uint32_t v;
  std::memcpy(&v, p, sizeof(v));
  if constexpr (std::endian::native == std::endian::big) {
    v = __builtin_bswap32(v);
  }
  return v;
}

std::uint64_t round(std::uint64_t acc, std::uint64_t input) {
  acc += input * kPrime2;
  acc = std::rotl(acc, 31);
  return acc * kPrime1;
}

std::uint64_t merge_round(std::uint64_t acc, std::uint64_t val) {
  acc ^= round(0, val);
  return acc * kPrime1 + kPrime4;
}

} // namespace

std::uint64_t xxh64(std::span<const std::byte> payload, std::uint64_t seed) {
  const std::byte *p = payload.data();
  const std::byte *const end = p + payload.size();
  const std::size_t len = payload.size();
  std::uint64_t h;

  if (len >= 32) {
    std::uint64_t v1 = seed + kPrime1 + kPrime2;
    std::uint64_t v2 = seed + kPrime2;
    std::uint64_t v3 = seed;
    std::uint64_t v4 = seed - kPrime1;
    const std::byte *const limit = end - 32;
    do {
      v1 = round(v1, read64(p));
      v2 = round(v2, read64(p + 8));
      v3 = round(v3, read64(p + 16));
      v4 = round(v4, read64(p + 24));
      p += 32;
    } while (p <= limit);
    h = std::rotl(v1, 1) + std::rotl(v2, 7) + std::rotl(v3, 12) +
        std::rotl(v4, 18);
    h = merge_round(h, v1);
    h = merge_round(h, v2);
    h = merge_round(h, v3);
    h = merge_round(h, v4);
  } else {
    h = seed + kPrime5;
  }
  h += static_cast<std::uint64_t>(len);

  while (p + 8 <= end) {
    h ^= round(0, read64(p));
    h = std::rotl(h, 27) * kPrime1 + kPrime4;
    p += 8;
  }
  if (p + 4 <= end) {
    h ^= static_cast<std::uint64_t>(read32(p)) * kPrime1;
    h = std::rotl(h, 23) * kPrime2 + kPrime3;
    p += 4;
  }
  while (p < end) {
    h ^= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(*p)) * kPrime5;
    h = std::rotl(h, 11) * kPrime1;
    ++p;
  }

  h ^= h >> 33;
  h *= kPrime2;
  h ^= h >> 29;
  h *= kPrime3;
  h ^= h >> 32;
  return h;
}

ContentHash::ContentHash(std::uint64_t value) : value_(value) {
  if (value == 0) {
    throw std::invalid_argument("content hash 0 is reserved");
  }
}

std::uint64_t Xxh64Hasher::digest(std::span<const std::byte> payload) const {
  return xxh64(payload, 0);
}

const Hasher &default_hasher() {
  static const Xxh64Hasher hasher;
  return hasher;
}

ContentHash hash_bytes(std::span<const std::byte> payload) {
  return hash_bytes(payload, default_hasher());
}

ContentHash hash_bytes(std::span<const std::byte> payload, const Hasher &hasher) {
  if (payload.empty()) {
    throw Error(ErrorCode::EmptyPayload, "cannot hash an empty payload");
  }
  const std::uint64_t h = hasher.digest(payload);
  return ContentHash(h == 0 ? 1 : h);
}

void CollisionAuditStore::observe(ContentHash hash,
                                  std::span<const std::byte> payload) {
  ++observations_;
  auto [it, inserted] = first_seen_.try_emplace(hash.value());
  if (inserted) {
    it->second.assign(payload.begin(), payload.end());
    return;
  }
  const std::vector<std::byte> &stored = it->second;
  if (!std::equal(stored.begin(), stored.end(), payload.begin(), payload.end())) {
    ++collisions_;
  }
}

} // namespace dmlens

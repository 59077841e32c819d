#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace dmlens {

// A computed content hash. Never 0; 0 is reserved for "no hash" in traces.
class ContentHash {
public:
  explicit ContentHash(std::uint64_t value);

  std::uint64_t value() const { return value_; }

  auto operator<=>(const ContentHash &) const = default;

private:
  std::uint64_t value_;
};

// Plug point for the underlying 64-bit hash family.
class Hasher {
public:
  virtual ~Hasher() = default;
  virtual std::uint64_t digest(std::span<const std::byte> payload) const = 0;
};

// XXH64 with seed 0. No per-process seeding, so values are stable across runs.
class Xxh64Hasher final : public Hasher {
public:
  std::uint64_t digest(std::span<const std::byte> payload) const override;
};

const Hasher &default_hasher();

std::uint64_t xxh64(std::span<const std::byte> payload, std::uint64_t seed = 0);

// Throws Error(EmptyPayload) for an empty payload. A digest of 0 maps to 1.
ContentHash hash_bytes(std::span<const std::byte> payload);
ContentHash hash_bytes(std::span<const std::byte> payload, const Hasher &hasher);

inline std::span<const std::byte> as_bytes_view(const std::vector<std::uint8_t> &v) {
  return std::as_bytes(std::span<const std::uint8_t>(v));
}

/* Stores the first payload seen for every hash and counts later
 * observations whose bytes differ from it. Single writer.
 */
class CollisionAuditStore {
public:
  void observe(ContentHash hash, std::span<const std::byte> payload);

  std::size_t collision_count() const { return collisions_; }
  std::size_t observations() const { return observations_; }
  std::size_t unique_hashes() const { return first_seen_.size(); }

private:
  std::unordered_map<std::uint64_t, std::vector<std::byte>> first_seen_;
  std::size_t collisions_ = 0;
  std::size_t observations_ = 0;
};

} // namespace dmlens

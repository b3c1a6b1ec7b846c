#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace vpt {

// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Bijective on u64.
constexpr std::uint64_t
splitmix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a base seed and a salt.
constexpr std::uint64_t
derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept
{
  return splitmix64(splitmix64(seed) ^ (salt * 0xD1B54A32D192ED03ULL));
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;
std::uint32_t crc32_update(std::uint32_t crc,
                           std::span<const std::uint8_t> bytes) noexcept;

// Seeded generator with portable draws. std::mt19937_64 output is fixed by
// the standard; the distributions below avoid the implementation-defined
// std:: distributions so sequences match across standard libraries.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : m_engine(seed) {}

  std::uint64_t next_u64() { return m_engine(); }

  // Uniform integer in [0, bound). Rejection sampling, bound > 0.
  std::uint64_t uniform_index(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller.
  double normal();

private:
  std::mt19937_64 m_engine;
};

// Fisher-Yates permutation of [0, n) fully determined by (seed, epoch).
std::vector<std::size_t> seeded_permutation(std::size_t n,
                                            std::uint64_t seed,
                                            std::uint64_t epoch);

} // namespace vpt

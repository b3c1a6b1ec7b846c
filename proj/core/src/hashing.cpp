#include "vpt/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <zlib.h>

namespace vpt {

std::uint64_t
fnv1a64(std::string_view bytes) noexcept
{
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint32_t
crc32_update(std::uint32_t crc, std::span<const std::uint8_t> bytes) noexcept
{
  // zlib takes uInt lengths; feed in chunks so >4 GiB spans stay correct.
  constexpr std::size_t chunk = 1U << 30;
  uLong c = crc;
  for (std::size_t off = 0; off < bytes.size(); off += chunk) {
    const std::size_t n = std::min(chunk, bytes.size() - off);
    c = ::crc32(c, bytes.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(c);
}

std::uint32_t
crc32(std::span<const std::uint8_t> bytes) noexcept
{
  return crc32_update(0, bytes);
}

std::uint64_t
Rng::uniform_index(std::uint64_t bound)
{
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
                              - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = 0;
  do {
    x = m_engine();
  } while (x >= limit);
  return x % bound;
}

double
Rng::uniform()
{
  return static_cast<double>(m_engine() >> 11) * 0x1.0p-53;
}

double
Rng::normal()
{
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t>
seeded_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch)
{
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

} // namespace vpt

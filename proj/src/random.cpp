#include "coalesce/random.hpp"

#include <cmath>
#include <numbers>

namespace coalesce {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

RandomStream::RandomStream(std::uint64_t seed) noexcept {
  std::uint64_t s = seed;
  for (auto& word : state_) {
    s += kGolden;
    word = mix64(s);
  }
}

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t index) noexcept
    : RandomStream(mix64(master_seed ^ mix64(index + kGolden)) ^ index) {}

std::uint64_t RandomStream::below(std::uint64_t bound) noexcept {
  std::uint64_t x = (*this)();
  __uint128_t m = static_cast<__uint128_t>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      x = (*this)();
      m = static_cast<__uint128_t>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double RandomStream::exponential() noexcept {
  // 1 - u lies in (0, 1], so the log is finite.
  return -std::log1p(-uniform());
}

double RandomStream::normal() noexcept {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace coalesce

#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw is a pure function
// of (seed, stream, a, b, position), so generation order never matters.

#include <array>
#include <cstdint>

namespace dcq {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

enum class Stream : std::uint32_t {
  center = 1,
  train_noise = 2,
  holdout_noise = 3,
  batch = 4,
  protocol = 5,
  init = 6,
  head = 7,
};

class CounterStream {
 public:
  CounterStream(std::uint64_t seed, Stream stream, std::uint32_t a, std::uint32_t b = 0);
  CounterStream(std::uint64_t seed, Stream stream, std::uint64_t ab)
      : CounterStream(seed, stream, static_cast<std::uint32_t>(ab), static_cast<std::uint32_t>(ab >> 32)) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // [0, 1) with 53 random bits.
  double uniform();
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  PhiloxKey key_;
  PhiloxCounter base_;
  PhiloxCounter block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dcq

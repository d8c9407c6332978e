#pragma once

#include <cstdint>
#include <random>

namespace photocal {

/// Named random sub-streams derived from a single experiment seed.
enum class Stream : std::uint32_t {
  pose = 1,
  image_noise = 2,
  corner_noise = 3,
  trial_sampling = 4,
  test = 5,
};

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace photocal

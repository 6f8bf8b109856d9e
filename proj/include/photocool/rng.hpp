#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace photocool {

/// Independent noise substreams of one seed.
enum class Stream : std::uint64_t {
  thermal = 1,
  shot = 2,
  radiation_pressure = 3,
  initial_state = 4,
  counting = 5,
  synthetic_data = 6,
};

inline constexpr std::string_view rng_algorithm =
    "mt19937_64 seeded by splitmix64(seed, member, stream); "
    "normal: std::normal_distribution (Marsaglia polar), "
    "counts: std::poisson_distribution";

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the substream (seed, member, stream); distinct triples give
/// statistically independent mt19937_64 states.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t member, Stream stream);

class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint64_t member, Stream stream)
      : engine_(substream_seed(seed, member, stream)) {}

  double operator()() { return normal_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace photocool

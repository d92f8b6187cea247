#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cloudburst {

// A labelled random stream derived from the scenario seed. Each consumer owns
// its own stream so draws in one module never perturb another's.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view label);

  // Uniform in [0, 1) with 53 bits of resolution; identical on every platform.
  double uniform();

  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

}  // namespace cloudburst

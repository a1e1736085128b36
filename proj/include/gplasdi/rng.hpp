// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gplasdi {

/// Derives an independent 64-bit seed for a named stream (FNV-1a of the
/// label mixed into the run seed through SplitMix64).
std::uint64_t stream_seed(std::uint64_t run_seed, std::string_view label);

/// Standard normal draws via Box–Muller on top of std::mt19937_64. Unlike
/// std::normal_distribution the sequence is identical across standard
/// libraries.
class NormalGenerator {
 public:
  explicit NormalGenerator(std::uint64_t seed) : engine_(seed) {}

  double operator()();
  double uniform(double lo, double hi);
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  double unit_open();  // (0, 1]

  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace gplasdi

#pragma once

#include "sketchplay/core.hpp"
#include "sketchplay/trajectory.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

// Shared helpers for the unit tests: seeded generators for property tests
// and small fixture builders. Every generator is deterministic per seed so a
// failing case can be replayed from the printed seed.
namespace sketchplay::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  // Multiples of 2^-bits in [lo, hi]: sums and power-of-two scalings of
  // these stay exact in double precision.
  double dyadic(double lo, double hi, int bits = 10) {
    const double scale = std::ldexp(1.0, bits);
    return std::round(uniform(lo, hi) * scale) / scale;
  }

  Vec3 vec(double lo, double hi) { return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)); }

  // Random walk with strictly increasing dyadic timestamps.
  trajectory::Stroke dyadic_stroke(int points, bool planar = false) {
    trajectory::Stroke s;
    double t = dyadic(0.0, 1.0, 7);
    Vec3 p(dyadic(-1, 1), dyadic(-1, 1), planar ? 0.0 : dyadic(-1, 1));
    for (int i = 0; i < points; ++i) {
      s.points.push_back({t, p});
      t += std::ldexp(1.0, -7) * integer(1, 4);
      p += Vec3(dyadic(-0.05, 0.05), dyadic(-0.05, 0.05), planar ? 0.0 : dyadic(-0.05, 0.05));
    }
    return s;
  }

 private:
  std::mt19937_64 rng_;
};

inline std::uint64_t seed_for(int trial) { return 0x5eed0000u + static_cast<std::uint64_t>(trial); }

// Builds a stroke from a position function sampled at `rate` Hz over [0, duration].
template <typename F>
trajectory::Stroke sample_path(F&& path, double rate, double duration) {
  trajectory::Stroke s;
  const int n = static_cast<int>(std::floor(duration * rate + 1e-9));
  for (int i = 0; i <= n; ++i) {
    const double t = i / rate;
    s.points.push_back({t, path(t)});
  }
  return s;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sketchplay-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

#define EXPECT_ERROR_CODE(stmt, expected_code)                                   \
  do {                                                                           \
    try {                                                                        \
      stmt;                                                                      \
      ADD_FAILURE() << "expected " << ::sketchplay::to_string(expected_code);    \
    } catch (const ::sketchplay::Error& e) {                                     \
      EXPECT_EQ(e.code(), expected_code) << e.what();                            \
    }                                                                            \
  } while (0)

}  // namespace sketchplay::testing

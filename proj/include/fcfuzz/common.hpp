#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fcfuzz {

// Runtime failure: I/O, numerics, divergence. CLI maps this to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, out-of-range config values. Exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

uint64_t splitmix64(uint64_t& state);

// Deterministic RNG. mt19937_64 (engine output is fully specified by the
// standard) with hand-rolled value mappings, so streams are identical across
// standard-library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);
  int uniform_int(int n);                // unbiased in [0, n)
  double normal();                       // N(0, 1)
  double normal(double mean, double sigma);

  // Independent substream; deterministic in (seed, stream) only.
  Rng child(uint64_t stream) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

double log_sum_exp(std::span<const double> v);

// FNV-1a, used for content-addressed stage caching (not security).
uint64_t fnv1a64(std::string_view bytes,
                 uint64_t h = 1469598103934665603ull);

// Shortest decimal form that round-trips exactly; '.' decimal, locale-free.
std::string format_double(double v);

// Strict locale-free parse of a full token; rejects trailing junk, NaN, inf.
double parse_double(std::string_view token, const std::string& context);
long long parse_int(std::string_view token, const std::string& context);

}  // namespace fcfuzz

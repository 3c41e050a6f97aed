#pragma once

#include <cmath>
#include <cstdint>

#include "vcsim/common.hpp"

namespace vcsim {

namespace detail {
// splitmix64 finalizer; full-avalanche 64-bit mix.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based generator: output i of stream k is a pure function of (k, i),
// so draws are independent of evaluation order and safe to use from parallel
// loops keyed by (seed, substream..., index).
class counter_rng {
 public:
  explicit counter_rng(uint64_t key) : key_(key) {}

  // Derive a child stream; mixing is injective enough that distinct id chains
  // give unrelated streams.
  counter_rng stream(uint64_t id) const {
    return counter_rng(detail::mix64(key_ ^ detail::mix64(id + 0x517cc1b727220a95ull)));
  }
  counter_rng stream(uint64_t a, uint64_t b) const { return stream(a).stream(b); }
  counter_rng stream(uint64_t a, uint64_t b, uint64_t c) const {
    return stream(a).stream(b).stream(c);
  }

  uint64_t at(uint64_t i) const { return detail::mix64(key_ ^ detail::mix64(i * 0xd1342543de82ef95ull + 1)); }

  // Order-independent uniform draw: output i of this stream.
  double uniform_at(uint64_t i) const { return static_cast<double>(at(i) >> 11) * 0x1.0p-53; }

  uint64_t next() { return at(ctr_++); }

  // Uniform in [0, 1): 53 mantissa bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // Uniform in (0, 1]: safe under log().
  double uniform_pos() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

  double normal() {
    double u = uniform_pos();
    double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * pi * v);
  }

  cd cnormal() {  // CN(0,1): unit total variance
    double u = uniform_pos();
    double v = uniform();
    double r = std::sqrt(-std::log(u));
    return cd(r * std::cos(2.0 * pi * v), r * std::sin(2.0 * pi * v));
  }

 private:
  uint64_t key_;
  uint64_t ctr_ = 0;
};

}  // namespace vcsim

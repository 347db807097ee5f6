#pragma once

#include <cmath>
#include <cstdint>
#include <locale>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "unmix/errors.hpp"

namespace unmix {

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// distribution transforms are written out here because std::*_distribution
// output is implementation-defined and would break cross-toolchain
// reproducibility of synthesized datasets and training runs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  int64_t uniform_int(int64_t n) {
    if (n <= 0) throw ConfigError("uniform_int: n must be positive");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
  }

  // Box-Muller, cache-free so that serialized state fully captures the stream.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename V>
  void shuffle(V& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      const int64_t j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

  std::string state() const {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << gen_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is.imbue(std::locale::classic());
    is >> gen_;
    if (is.fail()) throw FormatError("Rng::set_state: malformed state string");
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace unmix

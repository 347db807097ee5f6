#include "unmix/toy.hpp"

#include <algorithm>
#include <numeric>

namespace unmix {

namespace {

constexpr double kMinIntensity = 0.5;

std::vector<int64_t> pick_distinct(int64_t count, int64_t limit, Rng& rng) {
  std::vector<int64_t> all(static_cast<size_t>(limit));
  std::iota(all.begin(), all.end(), 0);
  rng.shuffle(all);
  all.resize(static_cast<size_t>(count));
  return all;
}

}  // namespace

std::vector<SourceImage> make_bar_sources(int64_t n, int64_t size, bool horizontal,
                                          SourceLabel label, Rng& rng) {
  std::vector<SourceImage> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    SourceImage si;
    si.pixels = TensorF({1, size, size});
    const int64_t nbars = 1 + rng.uniform_int(3);  // 1..3 bars
    for (int64_t line : pick_distinct(nbars, size, rng)) {
      const float v = static_cast<float>(rng.uniform(kMinIntensity, 1.0));
      for (int64_t t = 0; t < size; ++t) {
        const int64_t r = horizontal ? line : t;
        const int64_t c = horizontal ? t : line;
        si.pixels[r * size + c] = v;
      }
    }
    si.source_label = label;
    si.origin_id = (horizontal ? "hbar:" : "vbar:") + std::to_string(i);
    out.push_back(std::move(si));
  }
  return out;
}

std::vector<SourceImage> make_dot_sources(int64_t n, int64_t size, SourceLabel label, Rng& rng) {
  std::vector<SourceImage> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    SourceImage si;
    si.pixels = TensorF({1, size, size});
    const int64_t ndots = 3 + rng.uniform_int(4);  // 3..6 dots
    for (int64_t d = 0; d < ndots; ++d) {
      const int64_t r = rng.uniform_int(size);
      const int64_t c = rng.uniform_int(size);
      si.pixels[r * size + c] = static_cast<float>(rng.uniform(kMinIntensity, 1.0));
    }
    si.source_label = label;
    si.origin_id = "dot:" + std::to_string(i);
    out.push_back(std::move(si));
  }
  return out;
}

}  // namespace unmix

#pragma once

#include <vector>

#include "unmix/data.hpp"

namespace unmix {

// Synthetic source generators for smoke runs and tests. Bars light up whole
// rows (horizontal) or columns (vertical) with random intensities; dots are
// sparse bright pixels. Painted on a `size` x `size` single-channel canvas.
std::vector<SourceImage> make_bar_sources(int64_t n, int64_t size, bool horizontal,
                                          SourceLabel label, Rng& rng);
std::vector<SourceImage> make_dot_sources(int64_t n, int64_t size, SourceLabel label, Rng& rng);

}  // namespace unmix

#pragma once

#include <optional>
#include <string>

#include "unmix/tensor.hpp"

namespace unmix {

// Decodes an image file to CHW float in [0,1], rescaled to (h,w) with
// `channels` planes (1 = grayscale, 3 = RGB). Returns nullopt when the file
// cannot be decoded.
std::optional<TensorF> try_decode_image_chw(const std::string& path, int64_t h, int64_t w,
                                            int64_t channels, bool invert);

// Writes a CHW float tensor as PNG, clamping values to [0,1] for display.
void write_image_png(const std::string& path, const TensorF& chw);

}  // namespace unmix

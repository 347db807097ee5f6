#include "unmix/imageio.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "unmix/errors.hpp"

namespace unmix {

std::optional<TensorF> try_decode_image_chw(const std::string& path, int64_t h, int64_t w,
                                            int64_t channels, bool invert) {
  const int flag = channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR;
  cv::Mat img = cv::imread(path, flag);
  if (img.empty()) return std::nullopt;
  if (img.rows != h || img.cols != w) {
    cv::Mat resized;
    cv::resize(img, resized, cv::Size(static_cast<int>(w), static_cast<int>(h)), 0, 0,
               cv::INTER_AREA);
    img = resized;
  }
  TensorF out({channels, h, w});
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      if (channels == 1) {
        const uint8_t v = img.at<uint8_t>(static_cast<int>(y), static_cast<int>(x));
        out[y * w + x] = invert ? float(255 - v) / 255.0f : float(v) / 255.0f;
      } else {
        const cv::Vec3b bgr = img.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x));
        // planes are RGB
        for (int64_t c = 0; c < 3; ++c) {
          const uint8_t v = bgr[static_cast<int>(2 - c)];
          out[(c * h + y) * w + x] = invert ? float(255 - v) / 255.0f : float(v) / 255.0f;
        }
      }
    }
  }
  return out;
}

void write_image_png(const std::string& path, const TensorF& chw) {
  if (chw.rank() != 3) throw DimensionError("write_image_png: expected CHW tensor");
  const int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  if (c != 1 && c != 3) throw DimensionError("write_image_png: 1 or 3 channels only");
  cv::Mat img(static_cast<int>(h), static_cast<int>(w), c == 1 ? CV_8UC1 : CV_8UC3);
  auto to_byte = [](float v) {
    const float clamped = std::min(1.0f, std::max(0.0f, v));
    return static_cast<uint8_t>(std::lround(clamped * 255.0f));
  };
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      if (c == 1) {
        img.at<uint8_t>(static_cast<int>(y), static_cast<int>(x)) = to_byte(chw[y * w + x]);
      } else {
        cv::Vec3b bgr;
        for (int64_t ch = 0; ch < 3; ++ch)
          bgr[static_cast<int>(2 - ch)] = to_byte(chw[(ch * h + y) * w + x]);
        img.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x)) = bgr;
      }
    }
  if (!cv::imwrite(path, img)) throw DataError("failed to write image: " + path);
}

}  // namespace unmix

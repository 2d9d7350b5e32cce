#pragma once

#include <vector>

#include "dcg/common.hpp"

namespace dcg {

// Interleaved raster with values in [0, 1]. Channel count is 1 or 3.
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> px;  // h * w * c, row-major, channel-interleaved

  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : h(height), w(width), c(channels),
        px(static_cast<size_t>(height) * width * channels, fill) {}

  double& at(int y, int x, int ch) {
    return px[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  double at(int y, int x, int ch) const {
    return px[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  bool empty() const { return px.empty(); }
  bool all_finite() const;
};

// Quantize every channel value to the nearest 8-bit level (k/255). Generated
// datasets are quantized so an export/load round trip is bit-exact.
void quantize_8bit(Image& img);

// Clamp all values into [0, 1].
void clamp01(Image& img);

// Per-pixel luminance (single-channel copy for c==1 inputs).
Image luminance(const Image& img);

// 3x3 box blur applied n times, channel-wise, edge-clamped.
Image box_blur(const Image& img, int passes);

// Sobel gradient magnitude of a single-channel image, normalized to [0,1].
Image sobel_magnitude(const Image& gray);

// Replicate a single-channel image to 3 channels (no-op for 3-channel input).
Image to_3channel(const Image& img);

}  // namespace dcg

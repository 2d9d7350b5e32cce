#include "dcg/image.hpp"

#include <algorithm>
#include <cmath>

namespace dcg {

bool Image::all_finite() const {
  for (double v : px)
    if (!std::isfinite(v)) return false;
  return true;
}

void quantize_8bit(Image& img) {
  for (double& v : img.px) {
    double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    v = q / 255.0;
  }
}

void clamp01(Image& img) {
  for (double& v : img.px) v = std::clamp(v, 0.0, 1.0);
}

Image luminance(const Image& img) {
  Image out(img.h, img.w, 1);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      if (img.c == 1) {
        out.at(y, x, 0) = img.at(y, x, 0);
      } else {
        out.at(y, x, 0) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                          0.114 * img.at(y, x, 2);
      }
    }
  return out;
}

Image box_blur(const Image& img, int passes) {
  Image cur = img;
  for (int p = 0; p < passes; ++p) {
    Image next(cur.h, cur.w, cur.c);
    for (int y = 0; y < cur.h; ++y)
      for (int x = 0; x < cur.w; ++x)
        for (int ch = 0; ch < cur.c; ++ch) {
          double s = 0.0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = std::clamp(y + dy, 0, cur.h - 1);
              const int xx = std::clamp(x + dx, 0, cur.w - 1);
              s += cur.at(yy, xx, ch);
            }
          next.at(y, x, ch) = s / 9.0;
        }
    cur = std::move(next);
  }
  return cur;
}

Image sobel_magnitude(const Image& gray) {
  Image out(gray.h, gray.w, 1);
  auto px = [&](int y, int x) {
    y = std::clamp(y, 0, gray.h - 1);
    x = std::clamp(x, 0, gray.w - 1);
    return gray.at(y, x, 0);
  };
  double mx = 0.0;
  for (int y = 0; y < gray.h; ++y)
    for (int x = 0; x < gray.w; ++x) {
      const double gx = px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1) -
                        px(y - 1, x - 1) - 2 * px(y, x - 1) - px(y + 1, x - 1);
      const double gy = px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1) -
                        px(y - 1, x - 1) - 2 * px(y - 1, x) - px(y - 1, x + 1);
      const double m = std::sqrt(gx * gx + gy * gy);
      out.at(y, x, 0) = m;
      mx = std::max(mx, m);
    }
  if (mx > 0.0)
    for (double& v : out.px) v /= mx;
  return out;
}

Image to_3channel(const Image& img) {
  if (img.c == 3) return img;
  Image out(img.h, img.w, 3);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = img.at(y, x, 0);
  return out;
}

}  // namespace dcg

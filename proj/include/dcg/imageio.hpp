#pragma once

#include <string>

#include "dcg/image.hpp"

namespace dcg {

// 8-bit PNG encoder (gray or RGB, non-interlaced) over zlib. Deterministic:
// identical pixels produce identical bytes.
void write_png(const std::string& path, const Image& img);

// PNG decoder for 8-bit non-interlaced gray / gray+alpha / RGB / RGBA files
// (all standard scanline filters supported). Alpha is dropped; gray images
// come back with c == 1.
Image read_png(const std::string& path);

// Binary PPM (P6) / PGM (P5), maxval 255.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// Dispatch on extension: .png, .ppm, .pgm.
void write_image(const std::string& path, const Image& img);
Image read_image(const std::string& path);

}  // namespace dcg

#include "dcg/imageio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace dcg {

namespace {

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t read_u32be(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& data) {
  put_u32be(out, static_cast<uint32_t>(data.size()));
  std::vector<uint8_t> td;
  td.insert(td.end(), type, type + 4);
  td.insert(td.end(), data.begin(), data.end());
  out.insert(out.end(), td.begin(), td.end());
  const uint32_t crc = static_cast<uint32_t>(
      ::crc32(0L, td.data(), static_cast<uInt>(td.size())));
  put_u32be(out, crc);
}

uint8_t to_byte(double v) {
  return static_cast<uint8_t>(std::round(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open file: " + path);
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write file: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("write failed: " + path);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
  if (img.empty()) throw InputError("write_png: empty image");
  const int ch = img.c == 1 ? 1 : 3;
  const uint8_t color_type = ch == 1 ? 0 : 2;
  const size_t row_bytes = static_cast<size_t>(img.w) * ch;

  // Raw scanlines, filter type 0 per row.
  std::vector<uint8_t> raw;
  raw.reserve((row_bytes + 1) * img.h);
  for (int y = 0; y < img.h; ++y) {
    raw.push_back(0);
    for (int x = 0; x < img.w; ++x)
      for (int k = 0; k < ch; ++k) raw.push_back(to_byte(img.at(y, x, k)));
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw InternalError("write_png: zlib compression failed");
  comp.resize(comp_len);

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(img.w));
  put_u32be(ihdr, static_cast<uint32_t>(img.h));
  ihdr.push_back(8);           // bit depth
  ihdr.push_back(color_type);  // 0 gray, 2 rgb
  ihdr.push_back(0);           // compression
  ihdr.push_back(0);           // filter
  ihdr.push_back(0);           // interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", comp);
  append_chunk(out, "IEND", {});
  write_file(path, out);
}

Image read_png(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file(path);
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
    throw InputError("not a PNG file: " + path);

  int w = 0, h = 0, channels = 0;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  while (pos + 8 <= bytes.size()) {
    const uint32_t len = read_u32be(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw InputError("truncated PNG: " + path);
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* data = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      w = static_cast<int>(read_u32be(data));
      h = static_cast<int>(read_u32be(data + 4));
      const int bit_depth = data[8];
      const int color_type = data[9];
      const int interlace = data[12];
      if (bit_depth != 8 || interlace != 0)
        throw InputError("unsupported PNG variant (need 8-bit non-interlaced): " + path);
      switch (color_type) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 4: channels = 2; break;
        case 6: channels = 4; break;
        default: throw InputError("unsupported PNG color type: " + path);
      }
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (w <= 0 || h <= 0 || channels == 0 || idat.empty())
    throw InputError("malformed PNG: " + path);

  const size_t row_bytes = static_cast<size_t>(w) * channels;
  std::vector<uint8_t> raw((row_bytes + 1) * h);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) !=
          Z_OK ||
      raw_len != raw.size())
    throw InputError("PNG inflate failed: " + path);

  // Undo scanline filters.
  std::vector<uint8_t> pix(row_bytes * h);
  const int bpp = channels;
  for (int y = 0; y < h; ++y) {
    const uint8_t filter = raw[(row_bytes + 1) * y];
    const uint8_t* src = &raw[(row_bytes + 1) * y + 1];
    uint8_t* dst = &pix[row_bytes * y];
    const uint8_t* prev = y > 0 ? &pix[row_bytes * (y - 1)] : nullptr;
    for (size_t i = 0; i < row_bytes; ++i) {
      const int a = i >= static_cast<size_t>(bpp) ? dst[i - bpp] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= static_cast<size_t>(bpp)) ? prev[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw InputError("unsupported PNG filter: " + path);
      }
      dst[i] = static_cast<uint8_t>(v & 0xff);
    }
  }

  const int out_c = channels >= 3 ? 3 : 1;
  Image img(h, w, out_c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const uint8_t* p = &pix[row_bytes * y + static_cast<size_t>(x) * channels];
      for (int k = 0; k < out_c; ++k) img.at(y, x, k) = p[k] / 255.0;
    }
  return img;
}

void write_ppm(const std::string& path, const Image& img) {
  if (img.empty()) throw InputError("write_ppm: empty image");
  const int ch = img.c == 1 ? 1 : 3;
  std::vector<uint8_t> out;
  char header[64];
  const int n = std::snprintf(header, sizeof(header), "P%c\n%d %d\n255\n",
                              ch == 1 ? '5' : '6', img.w, img.h);
  out.insert(out.end(), header, header + n);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int k = 0; k < ch; ++k) out.push_back(to_byte(img.at(y, x, k)));
  write_file(path, out);
}

Image read_ppm(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file(path);
  size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos]))
      tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P6" && magic != "P5") throw InputError("not a binary PPM/PGM: " + path);
  const int ch = magic == "P6" ? 3 : 1;
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (maxval != 255) throw InputError("unsupported PPM maxval: " + path);
  ++pos;  // single whitespace after maxval
  const size_t need = static_cast<size_t>(w) * h * ch;
  if (bytes.size() - pos < need) throw InputError("truncated PPM: " + path);
  Image img(h, w, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < ch; ++k) img.at(y, x, k) = bytes[pos++] / 255.0;
  return img;
}

namespace {
bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
}  // namespace

void write_image(const std::string& path, const Image& img) {
  if (ends_with(path, ".png")) return write_png(path, img);
  if (ends_with(path, ".ppm") || ends_with(path, ".pgm")) return write_ppm(path, img);
  throw InputError("unsupported image extension: " + path);
}

Image read_image(const std::string& path) {
  if (ends_with(path, ".png")) return read_png(path);
  if (ends_with(path, ".ppm") || ends_with(path, ".pgm")) return read_ppm(path);
  throw InputError("unsupported image extension: " + path);
}

}  // namespace dcg

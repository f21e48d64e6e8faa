#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "din/errors.hpp"

namespace din {

// 8-bit RGB image buffer, row-major, 3 bytes per pixel.
struct Image {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> rgb;
};

namespace pngdetail {

inline void put_u32be(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>(v & 0xFF));
}

inline uint32_t read_u32be(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void append_chunk(std::string& out, const char type[4], const std::string& payload) {
  put_u32be(out, static_cast<uint32_t>(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  const uint32_t crc =
      crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  put_u32be(out, crc);
}

inline uint8_t paeth(uint8_t a, uint8_t b, uint8_t c) {
  const int p = int(a) + int(b) - int(c);
  const int pa = std::abs(p - int(a)), pb = std::abs(p - int(b)), pc = std::abs(p - int(c));
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace pngdetail

inline void write_png(const std::string& path, const Image& img) {
  check(img.width > 0 && img.height > 0 &&
            img.rgb.size() == static_cast<size_t>(3 * img.width * img.height),
        "write_png: inconsistent image buffer");
  const int64_t stride = 3 * img.width;
  std::vector<uint8_t> raw(static_cast<size_t>((stride + 1) * img.height));
  for (int64_t y = 0; y < img.height; ++y) {
    raw[y * (stride + 1)] = 0;  // filter: None
    std::memcpy(raw.data() + y * (stride + 1) + 1, img.rgb.data() + y * stride, stride);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw io_error("write_png: deflate failed");

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  pngdetail::put_u32be(ihdr, static_cast<uint32_t>(img.width));
  pngdetail::put_u32be(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  pngdetail::append_chunk(out, "IHDR", ihdr);
  pngdetail::append_chunk(out, "IDAT", std::string(reinterpret_cast<char*>(comp.data()), comp_len));
  pngdetail::append_chunk(out, "IEND", "");

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw io_error("write to '" + path + "' failed");
}

// Decodes 8-bit non-interlaced PNGs (grayscale, gray+alpha, truecolor,
// truecolor+alpha, palette) to RGB; alpha is dropped.
inline Image read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "'");
  std::vector<uint8_t> blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (blob.size() < 8 || std::memcmp(blob.data(), "\x89PNG\r\n\x1a\n", 8) != 0)
    throw io_error("'" + path + "' is not a PNG");

  size_t pos = 8;
  int64_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<uint8_t> idat;
  std::vector<uint8_t> palette;  // rgb triples
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 8 <= blob.size() && !saw_iend) {
    const uint32_t len = pngdetail::read_u32be(blob.data() + pos);
    if (pos + 12 + len > blob.size()) throw io_error("'" + path + "': truncated chunk");
    const std::string type(reinterpret_cast<char*>(blob.data() + pos + 4), 4);
    const uint8_t* payload = blob.data() + pos + 8;
    if (type == "IHDR") {
      if (len != 13) throw io_error("'" + path + "': bad IHDR");
      width = pngdetail::read_u32be(payload);
      height = pngdetail::read_u32be(payload + 4);
      bit_depth = payload[8];
      color_type = payload[9];
      interlace = payload[12];
      saw_ihdr = true;
    } else if (type == "PLTE") {
      palette.assign(payload, payload + len);
    } else if (type == "IDAT") {
      idat.insert(idat.end(), payload, payload + len);
    } else if (type == "IEND") {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || idat.empty()) throw io_error("'" + path + "': missing IHDR or IDAT");
  if (bit_depth != 8) throw io_error("'" + path + "': only 8-bit PNGs are supported");
  if (interlace != 0) throw io_error("'" + path + "': interlaced PNGs are not supported");
  int channels;
  switch (color_type) {
    case 0: channels = 1; break;
    case 2: channels = 3; break;
    case 3: channels = 1; break;
    case 4: channels = 2; break;
    case 6: channels = 4; break;
    default: throw io_error("'" + path + "': unsupported color type");
  }
  if (color_type == 3 && palette.empty()) throw io_error("'" + path + "': palette image without PLTE");
  if (width <= 0 || height <= 0) throw io_error("'" + path + "': bad dimensions");

  const int64_t stride = static_cast<int64_t>(width) * channels;
  std::vector<uint8_t> raw(static_cast<size_t>((stride + 1) * height));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int zres = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  if (zres != Z_OK || raw_len != raw.size()) throw io_error("'" + path + "': corrupt image data");

  // undo per-row filters in place
  std::vector<uint8_t> prev(static_cast<size_t>(stride), 0);
  std::vector<uint8_t> cur(static_cast<size_t>(stride));
  Image img;
  img.width = width;
  img.height = height;
  img.rgb.resize(static_cast<size_t>(3 * width * height));
  const int bpp = channels;
  for (int64_t y = 0; y < height; ++y) {
    const uint8_t filter = raw[y * (stride + 1)];
    const uint8_t* src = raw.data() + y * (stride + 1) + 1;
    for (int64_t x = 0; x < stride; ++x) {
      const uint8_t a = x >= bpp ? cur[x - bpp] : 0;
      const uint8_t b = prev[x];
      const uint8_t c = x >= bpp ? prev[x - bpp] : 0;
      uint8_t v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v = static_cast<uint8_t>(v + a); break;
        case 2: v = static_cast<uint8_t>(v + b); break;
        case 3: v = static_cast<uint8_t>(v + ((int(a) + int(b)) >> 1)); break;
        case 4: v = static_cast<uint8_t>(v + pngdetail::paeth(a, b, c)); break;
        default: throw io_error("'" + path + "': unknown filter type");
      }
      cur[x] = v;
    }
    for (int64_t px = 0; px < width; ++px) {
      uint8_t r, g, bch;
      const uint8_t* p = cur.data() + px * channels;
      switch (color_type) {
        case 0: r = g = bch = p[0]; break;
        case 2: r = p[0]; g = p[1]; bch = p[2]; break;
        case 3: {
          const size_t idx = static_cast<size_t>(p[0]) * 3;
          if (idx + 2 >= palette.size()) throw io_error("'" + path + "': palette index out of range");
          r = palette[idx];
          g = palette[idx + 1];
          bch = palette[idx + 2];
          break;
        }
        case 4: r = g = bch = p[0]; break;
        default: r = p[0]; g = p[1]; bch = p[2]; break;  // RGBA
      }
      uint8_t* dst = img.rgb.data() + (y * width + px) * 3;
      dst[0] = r;
      dst[1] = g;
      dst[2] = bch;
    }
    std::swap(prev, cur);
  }
  return img;
}

}  // namespace din

#include "specstyle/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include "specstyle/common.hpp"
#include "specstyle/crc32.hpp"

namespace specstyle::img {

GrayImage render_spectrogram(const dsp::LogMagSpectrogram& spec) {
  if (spec.bins < 1 || spec.frames < 1) {
    throw ShapeError("render_spectrogram: empty spectrogram");
  }
  GrayImage im;
  im.width = spec.frames;
  im.height = spec.bins;
  im.pixels.assign(size_t(im.width * im.height), 0);
  double lo = spec.values[0], hi = spec.values[0];
  for (double v : spec.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;
  if (range <= 0.0) return im;  // constant input -> uniform image
  for (int64_t row = 0; row < im.height; ++row) {
    const int bin = int(im.height - 1 - row);  // low frequencies at the bottom
    for (int64_t col = 0; col < im.width; ++col) {
      const double v = (spec.at(bin, int(col)) - lo) / range;
      im.pixels[size_t(row * im.width + col)] = uint8_t(std::lround(255.0 * v));
    }
  }
  return im;
}

namespace {

void check_image(const GrayImage& im) {
  if (im.width < 1 || im.height < 1 ||
      im.pixels.size() != size_t(im.width * im.height)) {
    throw ShapeError("image dimensions do not match pixel buffer");
  }
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(bytes.data(), std::streamsize(bytes.size()));
  f.flush();
  if (!f) throw IoError("failed writing " + path);
}

void put_be32(std::string& out, uint32_t v) {
  out.push_back(char((v >> 24) & 0xFF));
  out.push_back(char((v >> 16) & 0xFF));
  out.push_back(char((v >> 8) & 0xFF));
  out.push_back(char(v & 0xFF));
}

void put_chunk(std::string& out, const char type[4], const std::string& data) {
  put_be32(out, uint32_t(data.size()));
  const size_t start = out.size();
  out.append(type, 4);
  out.append(data);
  const uint32_t crc = crc32(out.data() + start, out.size() - start);
  put_be32(out, crc);
}

}  // namespace

void write_pgm(const GrayImage& im, const std::string& path) {
  check_image(im);
  std::string out = "P5\n" + std::to_string(im.width) + " " + std::to_string(im.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(im.pixels.data()), im.pixels.size());
  write_file(path, out);
}

void write_png(const GrayImage& im, const std::string& path) {
  check_image(im);
  // Raw image stream: each scanline prefixed with filter byte 0 (None).
  std::vector<uint8_t> raw;
  raw.reserve(size_t(im.height) * size_t(im.width + 1));
  for (int64_t row = 0; row < im.height; ++row) {
    raw.push_back(0);
    const uint8_t* src = im.pixels.data() + row * im.width;
    raw.insert(raw.end(), src, src + im.width);
  }
  uLongf comp_len = compressBound(uLong(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), uLong(raw.size()), 9) != Z_OK) {
    throw IoError("png: zlib compression failed");
  }
  comp.resize(comp_len);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_be32(ihdr, uint32_t(im.width));
  put_be32(ihdr, uint32_t(im.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // color type: grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT",
            std::string(reinterpret_cast<const char*>(comp.data()), comp.size()));
  put_chunk(out, "IEND", "");
  write_file(path, out);
}

void write_image(const GrayImage& im, const std::string& path) {
  std::string ext;
  const size_t dot = path.find_last_of('.');
  if (dot != std::string::npos) ext = path.substr(dot);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  if (ext == ".png") {
    write_png(im, path);
  } else if (ext == ".pgm") {
    write_pgm(im, path);
  } else {
    throw ValueError("unsupported image extension (use .png or .pgm): " + path);
  }
}

}  // namespace specstyle::img

// include/specstyle/image.hpp
//
// Grayscale rendering of log-magnitude spectrograms: one pixel per
// time-frequency cell, low frequencies at the bottom, intensities stretched
// to the full 8-bit range. Writers for binary PGM and (via zlib) PNG.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specstyle/dsp.hpp"

namespace specstyle::img {

struct GrayImage {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> pixels;  // row-major, top row first
};

// height = bins, width = frames; bin 0 maps to the bottom row. Values are
// min/max stretched; a constant input produces a uniform (all-zero) image.
GrayImage render_spectrogram(const dsp::LogMagSpectrogram& spec);

void write_pgm(const GrayImage& im, const std::string& path);
void write_png(const GrayImage& im, const std::string& path);

// Dispatches on the file extension: .png or .pgm (case-insensitive).
void write_image(const GrayImage& im, const std::string& path);

}  // namespace specstyle::img

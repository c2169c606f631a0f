// Stylization pipeline and image-writer tests: geometry and validation of the
// window -> network -> reconstruction path, plus PGM/PNG output structure.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "specstyle/crc32.hpp"
#include "specstyle/image.hpp"
#include "specstyle/pipeline.hpp"
#include "test_util.hpp"

using namespace specstyle;

namespace {

model::Architecture tiny_arch() {
  model::Architecture a;
  a.channels = {1, 2, 2, 2, 2};
  a.input_h = 16;
  a.input_w = 16;
  return a;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

uint32_t be32(const unsigned char* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
         uint32_t(p[3]);
}

}  // namespace

TEST_CASE("stylize: geometry, trimming, and determinism") {
  const auto arch = tiny_arch();
  auto net = model::build_network<float>(arch, 17);
  dsp::StftConfig cfg;
  cfg.fft_size = 32;  // 2 * input_h
  cfg.hop = 8;
  cfg.window = dsp::Window::hann;

  // 600 samples at 8 kHz: frames = (600-32)/8 + 1 = 72 -> 4 full 16-frame
  // windows, 8 frames dropped.
  auto clip = testutil::make_speech_like(3, 600.0 / 8000.0, 8000);
  clip.samples.resize(600);

  pipeline::StylizeOptions opt;
  opt.gl_iterations = 8;
  opt.gl_seed = 5;
  const auto res = pipeline::stylize(clip, net, -4.0, 3.0, cfg, 8000, opt);

  CHECK(res.windows == 4);
  CHECK(res.content_logmag.bins == 17);   // input_h + Nyquist row
  CHECK(res.content_logmag.frames == 64);
  CHECK(res.output_logmag.bins == 17);
  CHECK(res.output_logmag.frames == 64);
  CHECK(res.audio.sample_rate == 8000);
  CHECK(res.audio.samples.size() == size_t(64 * 8));  // frames * hop
  REQUIRE(res.gl_convergence.size() == 8);
  for (size_t i = 1; i < res.gl_convergence.size(); ++i) {
    CHECK(res.gl_convergence[i] <= res.gl_convergence[i - 1] + 1e-12);
  }
  // The Nyquist row of the output is pinned to the log floor.
  for (int t = 0; t < res.output_logmag.frames; ++t) {
    CHECK(res.output_logmag.at(16, t) == std::log(res.output_logmag.epsilon));
  }
  // The content view is a verbatim crop of the input spectrogram.
  const auto logm = dsp::log_magnitude(dsp::stft(clip, cfg));
  for (int bin = 0; bin <= 16; ++bin) {
    for (int t = 0; t < 64; ++t) {
      CHECK(res.content_logmag.at(bin, t) == logm.at(bin, t));
    }
  }

  const auto res2 = pipeline::stylize(clip, net, -4.0, 3.0, cfg, 8000, opt);
  CHECK(res.audio.samples == res2.audio.samples);  // bitwise repeatable
  CHECK(res.output_logmag.values == res2.output_logmag.values);
}

TEST_CASE("stylize: input validation") {
  const auto arch = tiny_arch();
  auto net = model::build_network<float>(arch, 18);
  dsp::StftConfig cfg{32, 8, dsp::Window::hann};
  auto clip = testutil::make_speech_like(4, 0.1, 8000);

  dsp::StftConfig wrong{64, 8, dsp::Window::hann};  // fft != 2 * input_h
  CHECK_THROWS_AS(pipeline::stylize(clip, net, 0.0, 1.0, wrong, 8000, {}), ValueError);
  CHECK_THROWS_AS(pipeline::stylize(clip, net, 0.0, 0.0, cfg, 8000, {}), ValueError);

  dsp::AudioClip blip;
  blip.sample_rate = 8000;
  blip.samples.assign(100, 0.1);  // one frame, zero full windows
  CHECK_THROWS_AS(pipeline::stylize(blip, net, 0.0, 1.0, cfg, 8000, {}), ValueError);

  pipeline::StylizeOptions bad;
  bad.gl_iterations = 0;
  CHECK_THROWS_AS(pipeline::stylize(clip, net, 0.0, 1.0, cfg, 8000, bad), ValueError);
}

TEST_CASE("render_spectrogram: orientation and stretch") {
  dsp::LogMagSpectrogram spec;
  spec.bins = 2;
  spec.frames = 3;
  // bin 0: [0, 5, 10];  bin 1: [2.5, 5, 7.5]
  spec.values = {0.0, 5.0, 10.0, 2.5, 5.0, 7.5};
  const auto im = img::render_spectrogram(spec);
  CHECK(im.width == 3);
  CHECK(im.height == 2);
  REQUIRE(im.pixels.size() == 6);
  // Top row is bin 1, bottom row is bin 0; stretch maps [0,10] -> [0,255].
  CHECK(im.pixels[0] == 64);   // 2.5/10 * 255 rounded
  CHECK(im.pixels[1] == 128);
  CHECK(im.pixels[2] == 191);
  CHECK(im.pixels[3] == 0);
  CHECK(im.pixels[4] == 128);
  CHECK(im.pixels[5] == 255);

  dsp::LogMagSpectrogram flat;
  flat.bins = 2;
  flat.frames = 2;
  flat.values = {3.0, 3.0, 3.0, 3.0};
  const auto fim = img::render_spectrogram(flat);
  for (uint8_t p : fim.pixels) CHECK(p == 0);
}

TEST_CASE("PGM writer") {
  testutil::ScratchDir dir("pgm");
  img::GrayImage im;
  im.width = 3;
  im.height = 2;
  im.pixels = {10, 20, 30, 40, 50, 60};
  img::write_pgm(im, dir.path() + "/x.pgm");
  const std::string bytes = slurp(dir.path() + "/x.pgm");
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 6);
  CHECK(bytes.substr(0, header.size()) == header);
  CHECK(uint8_t(bytes[header.size()]) == 10);
  CHECK(uint8_t(bytes[header.size() + 5]) == 60);
}

TEST_CASE("PNG writer emits a valid 8-bit grayscale file") {
  testutil::ScratchDir dir("png");
  img::GrayImage im;
  im.width = 5;
  im.height = 3;
  im.pixels.resize(15);
  for (size_t i = 0; i < im.pixels.size(); ++i) im.pixels[i] = uint8_t(i * 17);
  const std::string path = dir.path() + "/x.png";
  img::write_png(im, path);
  const std::string bytes = slurp(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  REQUIRE(bytes.size() > 8 + 25);
  CHECK(std::memcmp(p, sig, 8) == 0);

  // IHDR: length 13, dims big-endian, bit depth 8, color type 0 (grayscale).
  CHECK(be32(p + 8) == 13);
  CHECK(std::memcmp(p + 12, "IHDR", 4) == 0);
  CHECK(be32(p + 16) == 5);
  CHECK(be32(p + 20) == 3);
  CHECK(p[24] == 8);
  CHECK(p[25] == 0);
  // IHDR chunk CRC covers the type + data.
  CHECK(be32(p + 29) == crc32(p + 12, 17));
  // File ends with IEND.
  CHECK(bytes.substr(bytes.size() - 8, 4) == "IEND");

  // Walk to the IDAT chunk and inflate it; scanlines are filter-0 + pixels.
  size_t off = 8;
  std::string idat;
  while (off + 8 <= bytes.size()) {
    const uint32_t len = be32(p + off);
    const std::string type = bytes.substr(off + 4, 4);
    if (type == "IDAT") idat.append(bytes, off + 8, len);
    off += 12 + len;
  }
  REQUIRE(!idat.empty());
  std::vector<unsigned char> raw(size_t((im.width + 1) * im.height));
  uLongf raw_len = uLongf(raw.size());
  REQUIRE(uncompress(raw.data(), &raw_len,
                     reinterpret_cast<const Bytef*>(idat.data()),
                     uLong(idat.size())) == Z_OK);
  REQUIRE(raw_len == raw.size());
  for (int64_t y = 0; y < im.height; ++y) {
    CHECK(raw[size_t(y * (im.width + 1))] == 0);  // filter byte
    for (int64_t x = 0; x < im.width; ++x) {
      CHECK(raw[size_t(y * (im.width + 1) + 1 + x)] ==
            im.pixels[size_t(y * im.width + x)]);
    }
  }
}

TEST_CASE("write_image dispatches on extension") {
  testutil::ScratchDir dir("disp");
  img::GrayImage im;
  im.width = 2;
  im.height = 2;
  im.pixels = {0, 85, 170, 255};
  CHECK_NOTHROW(img::write_image(im, dir.path() + "/a.PNG"));
  CHECK_NOTHROW(img::write_image(im, dir.path() + "/b.pgm"));
  CHECK_THROWS_AS(img::write_image(im, dir.path() + "/c.bmp"), ValueError);
  const std::string png = slurp(dir.path() + "/a.PNG");
  CHECK(uint8_t(png[0]) == 0x89);
  CHECK(slurp(dir.path() + "/b.pgm").substr(0, 2) == "P5");
}

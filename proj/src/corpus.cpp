#include "specstyle/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace specstyle::corpus {

namespace fs = std::filesystem;

namespace {

using Kind = WavError::Kind;

uint16_t rd_u16(const uint8_t* p) { return uint16_t(p[0] | (p[1] << 8)); }
uint32_t rd_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

void wr_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xFF));
  out.push_back(char(v >> 8));
}

void wr_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

std::vector<uint8_t> slurp(const std::string& path, Kind missing_kind) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw WavError(missing_kind, "cannot open " + path);
  const std::streamsize size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  if (size > 0) f.read(reinterpret_cast<char*>(buf.data()), size);
  if (!f) throw WavError(Kind::io, "failed reading " + path);
  return buf;
}

}  // namespace

dsp::AudioClip load_wav(const std::string& path) {
  const std::vector<uint8_t> buf = slurp(path, Kind::io);
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw WavError(Kind::bad_magic, path + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data_ptr = nullptr;
  uint32_t data_len = 0;

  size_t off = 12;
  while (off + 8 <= buf.size()) {
    const uint8_t* hdr = buf.data() + off;
    const uint32_t chunk_len = rd_u32(hdr + 4);
    const size_t body = off + 8;
    if (body + chunk_len > buf.size()) {
      throw WavError(Kind::truncated, path + ": chunk extends past end of file");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw WavError(Kind::truncated, path + ": short fmt chunk");
      const uint8_t* f = buf.data() + body;
      format = rd_u16(f + 0);
      channels = rd_u16(f + 2);
      rate = rd_u32(f + 4);
      bits = rd_u16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_ptr = buf.data() + body;
      data_len = chunk_len;
    }
    off = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw WavError(Kind::truncated, path + ": missing fmt chunk");
  if (format != 1 || bits != 16) {
    throw WavError(Kind::unsupported, path + ": only 16-bit integer PCM is supported");
  }
  if (channels == 0 || rate == 0) {
    throw WavError(Kind::unsupported, path + ": invalid channel count or sample rate");
  }
  if (data_ptr == nullptr) throw WavError(Kind::truncated, path + ": missing data chunk");

  const size_t frame_bytes = size_t(channels) * 2;
  const size_t nframes = data_len / frame_bytes;
  if (nframes == 0) throw WavError(Kind::empty, path + ": no audio samples");

  dsp::AudioClip clip;
  clip.sample_rate = int(rate);
  clip.samples.resize(nframes);
  for (size_t i = 0; i < nframes; ++i) {
    double acc = 0.0;
    for (size_t c = 0; c < channels; ++c) {
      const uint8_t* s = data_ptr + i * frame_bytes + c * 2;
      acc += double(int16_t(rd_u16(s)));
    }
    clip.samples[i] = acc / (32768.0 * double(channels));
  }
  return clip;
}

void save_wav(const dsp::AudioClip& clip, const std::string& path) {
  if (clip.sample_rate <= 0) throw ValueError("save_wav: invalid sample rate");
  const uint32_t data_len = uint32_t(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  wr_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  wr_u32(out, 16);
  wr_u16(out, 1);  // integer PCM
  wr_u16(out, 1);  // mono
  wr_u32(out, uint32_t(clip.sample_rate));
  wr_u32(out, uint32_t(clip.sample_rate) * 2);  // byte rate
  wr_u16(out, 2);                               // block align
  wr_u16(out, 16);                              // bits per sample
  out.append("data");
  wr_u32(out, data_len);
  for (double x : clip.samples) {
    long long q = llround(x * 32768.0);
    q = std::clamp(q, -32768ll, 32767ll);
    wr_u16(out, uint16_t(int16_t(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WavError(Kind::io, "cannot open " + path + " for writing");
  f.write(out.data(), std::streamsize(out.size()));
  f.flush();
  if (!f) throw WavError(Kind::io, "failed writing " + path);
}

// ---- manifest --------------------------------------------------------------

namespace {

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* window_name(dsp::Window w) {
  return w == dsp::Window::hann ? "hann" : "rect";
}

dsp::Window parse_window(const std::string& s) {
  if (s == "hann") return dsp::Window::hann;
  if (s == "rect") return dsp::Window::rectangular;
  throw IoError("manifest: unknown window type '" + s + "'");
}

int64_t parse_int(const std::string& s, const char* what) {
  size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw IoError(std::string("manifest: bad ") + what + " '" + s + "'");
  }
  if (pos != s.size() || v < 0) {
    throw IoError(std::string("manifest: bad ") + what + " '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, const char* what) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw IoError(std::string("manifest: bad ") + what + " '" + s + "'");
  }
  if (pos != s.size()) throw IoError(std::string("manifest: bad ") + what + " '" + s + "'");
  return v;
}

// "key=value" pairs separated by single spaces, with a fixed expected order.
std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

std::string expect_kv(const std::string& tok, const char* key) {
  const std::string prefix = std::string(key) + "=";
  if (tok.rfind(prefix, 0) != 0) {
    throw IoError("manifest: expected '" + prefix + "...', got '" + tok + "'");
  }
  return tok.substr(prefix.size());
}

}  // namespace

void write_manifest(const Manifest& m, const std::string& dir) {
  std::string out;
  for (const auto& e : m.entries) {
    out += e.id;
    out += '\t';
    out += e.source_path;
    out += '\t';
    out += std::to_string(e.sample_rate);
    out += '\t';
    out += std::to_string(e.num_windows);
    out += '\n';
  }
  out += "#stats mean=" + fmt_g17(m.mean) + " std=" + fmt_g17(m.std_dev) + "\n";
  out += "#stft fft=" + std::to_string(m.stft.fft_size) +
         " hop=" + std::to_string(m.stft.hop) +
         " window=" + std::string(window_name(m.stft.window)) + "\n";
  const std::string path = (fs::path(dir) / "manifest.txt").string();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(out.data(), std::streamsize(out.size()));
  f.flush();
  if (!f) throw IoError("failed writing " + path);
}

Manifest load_manifest(const std::string& dir) {
  const std::string path = (fs::path(dir) / "manifest.txt").string();
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  Manifest m;
  m.root_dir = dir;
  bool have_stats = false, have_stft = false;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#stats ", 0) == 0) {
      const auto toks = split(line.substr(7), ' ');
      if (toks.size() != 2) throw IoError("manifest: malformed #stats line");
      m.mean = parse_double(expect_kv(toks[0], "mean"), "mean");
      m.std_dev = parse_double(expect_kv(toks[1], "std"), "std");
      have_stats = true;
      continue;
    }
    if (line.rfind("#stft ", 0) == 0) {
      const auto toks = split(line.substr(6), ' ');
      if (toks.size() != 3) throw IoError("manifest: malformed #stft line");
      m.stft.fft_size = int(parse_int(expect_kv(toks[0], "fft"), "fft size"));
      m.stft.hop = int(parse_int(expect_kv(toks[1], "hop"), "hop"));
      m.stft.window = parse_window(expect_kv(toks[2], "window"));
      have_stft = true;
      continue;
    }
    if (line[0] == '#') throw IoError("manifest: unknown directive: " + line);
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw IoError("manifest: expected 4 tab-separated fields: " + line);
    }
    ManifestEntry e;
    e.id = fields[0];
    e.source_path = fields[1];
    e.sample_rate = parse_int(fields[2], "sample rate");
    e.num_windows = parse_int(fields[3], "window count");
    if (e.id.empty()) throw IoError("manifest: empty utterance id");
    m.entries.push_back(std::move(e));
  }
  if (!have_stats || !have_stft) {
    throw IoError(path + ": missing #stats or #stft footer");
  }
  if (!(m.std_dev > 0.0)) throw IoError(path + ": non-positive std");
  return m;
}

// ---- prepared windows ------------------------------------------------------

namespace {

std::vector<float> load_window_file(const std::string& path, int64_t expect) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open window file " + path);
  const std::streamsize size = f.tellg();
  if (size != std::streamsize(expect * 4)) {
    throw IoError(path + ": expected " + std::to_string(expect * 4) + " bytes, found " +
                  std::to_string(size));
  }
  f.seekg(0);
  std::vector<float> vals(static_cast<size_t>(expect));
  f.read(reinterpret_cast<char*>(vals.data()), size);
  if (!f) throw IoError("failed reading " + path);
  for (float v : vals) {
    if (!std::isfinite(v)) throw IoError(path + ": non-finite value in window");
  }
  return vals;
}

}  // namespace

WindowSet load_windows(const Manifest& m, int64_t rows, int64_t cols) {
  WindowSet set;
  set.rows = rows;
  set.cols = cols;
  for (const auto& e : m.entries) {
    for (int64_t k = 0; k < e.num_windows; ++k) {
      const std::string name = e.id + "_" + std::to_string(k);
      const std::string path = (fs::path(m.root_dir) / (name + ".f32")).string();
      set.windows.push_back(load_window_file(path, rows * cols));
      set.names.push_back(name);
    }
  }
  return set;
}

// ---- preparation -----------------------------------------------------------

namespace {

std::string make_id(const fs::path& file, const fs::path& base) {
  std::string rel = file.lexically_relative(base).generic_string();
  const std::string ext = ".wav";
  if (rel.size() >= ext.size()) {
    std::string tail = rel.substr(rel.size() - ext.size());
    std::transform(tail.begin(), tail.end(), tail.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (tail == ext) rel.resize(rel.size() - ext.size());
  }
  for (char& c : rel) {
    if (c == '/' || c == '\\' || c == ' ' || c == '\t') c = '_';
  }
  return rel;
}

}  // namespace

PrepareReport prepare_dataset(const std::string& input_dir, const std::string& output_dir,
                              const PrepareOptions& opt, std::ostream* log) {
  if (opt.window_frames < 1 || opt.crop_bins < 1) {
    throw ValueError("prepare_dataset: window geometry must be positive");
  }
  std::vector<fs::path> files;
  {
    std::error_code ec;
    fs::recursive_directory_iterator it(input_dir, ec), end;
    if (ec) throw IoError("cannot scan " + input_dir + ": " + ec.message());
    for (; it != end; ++it) {
      if (!it->is_regular_file()) continue;
      std::string ext = it->path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return char(std::tolower(c)); });
      if (ext == ".wav") files.push_back(it->path());
    }
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
  if (files.empty()) throw IoError("no .wav files found under " + input_dir);

  fs::create_directories(output_dir);

  PrepareReport report;
  double sum = 0.0, sumsq = 0.0;
  int64_t count = 0;

  for (const fs::path& file : files) {
    ++report.utterances_seen;
    const std::string id = make_id(file, input_dir);
    dsp::AudioClip clip = load_wav(file.string());
    clip = dsp::resample(clip, int(opt.target_rate));

    const int64_t min_samples =
        int64_t(opt.stft.fft_size) + (opt.window_frames - 1) * opt.stft.hop;
    if (int64_t(clip.samples.size()) < min_samples) {
      ++report.utterances_skipped;
      if (log) {
        *log << "warning: skipping " << id << ": " << clip.samples.size()
             << " samples is shorter than one window (" << min_samples << ")\n";
      }
      continue;
    }

    const dsp::ComplexSpectrogram spec = dsp::stft(clip, opt.stft);
    const dsp::LogMagSpectrogram logm = dsp::log_magnitude(spec, opt.epsilon);
    if (opt.crop_bins > logm.bins) {
      throw ValueError("prepare_dataset: crop_bins exceeds available bins");
    }
    const int64_t nwin = int64_t(logm.frames) / opt.window_frames;

    for (int64_t k = 0; k < nwin; ++k) {
      std::vector<float> buf;
      buf.reserve(size_t(opt.crop_bins * opt.window_frames));
      for (int64_t bin = 0; bin < opt.crop_bins; ++bin) {
        for (int64_t t = k * opt.window_frames; t < (k + 1) * opt.window_frames; ++t) {
          const float v = float(logm.at(int(bin), int(t)));
          buf.push_back(v);
          sum += double(v);
          sumsq += double(v) * double(v);
          ++count;
        }
      }
      const std::string wpath =
          (fs::path(output_dir) / (id + "_" + std::to_string(k) + ".f32")).string();
      std::ofstream wf(wpath, std::ios::binary | std::ios::trunc);
      if (!wf) throw IoError("cannot open " + wpath + " for writing");
      wf.write(reinterpret_cast<const char*>(buf.data()),
               std::streamsize(buf.size() * sizeof(float)));
      wf.flush();
      if (!wf) throw IoError("failed writing " + wpath);
    }

    ManifestEntry e;
    e.id = id;
    e.source_path = fs::absolute(file).lexically_normal().string();
    e.sample_rate = opt.target_rate;
    e.num_windows = nwin;
    report.manifest.entries.push_back(std::move(e));
  }

  if (count == 0) {
    throw IoError("prepare_dataset: no windows produced (every utterance too short)");
  }
  const double mean = sum / double(count);
  const double var = std::max(0.0, sumsq / double(count) - mean * mean);
  const double std_dev = std::sqrt(var);
  if (!(std_dev > 1e-12)) {
    throw IoError("prepare_dataset: degenerate corpus (zero variance)");
  }
  report.manifest.mean = mean;
  report.manifest.std_dev = std_dev;
  report.manifest.stft = opt.stft;
  report.manifest.root_dir = output_dir;
  write_manifest(report.manifest, output_dir);
  return report;
}

// ---- batching --------------------------------------------------------------

BatchStream::BatchStream(WindowSet windows, double mean, double std_dev,
                         int64_t batch_size, uint64_t seed)
    : set_(std::move(windows)),
      mean_(mean),
      std_dev_(std_dev),
      batch_size_(batch_size),
      rng_(seed) {
  if (batch_size_ < 1) throw ValueError("batch size must be positive");
  if (!(std_dev_ > 0.0)) throw ValueError("normalization std must be positive");
  if (int64_t(set_.windows.size()) < batch_size_) {
    throw ValueError("corpus has " + std::to_string(set_.windows.size()) +
                     " windows, need at least one full batch of " +
                     std::to_string(batch_size_));
  }
  const size_t want = size_t(set_.rows * set_.cols);
  for (const auto& w : set_.windows) {
    if (w.size() != want) throw ShapeError("window size mismatch in batch stream");
  }
  reshuffle();
}

void BatchStream::reshuffle() {
  order_.resize(set_.windows.size());
  std::iota(order_.begin(), order_.end(), size_t(0));
  for (size_t i = order_.size() - 1; i > 0; --i) {
    const size_t j = size_t(rng_() % (i + 1));
    std::swap(order_[i], order_[j]);
  }
  cursor_ = 0;
}

BatchStream::Batch BatchStream::next() {
  if (cursor_ + size_t(batch_size_) > order_.size()) {
    reshuffle();  // drop the partial remainder, start a new epoch
  }
  Batch batch;
  batch.b = batch_size_;
  batch.rows = set_.rows;
  batch.cols = set_.cols;
  batch.values.resize(size_t(batch_size_ * set_.rows * set_.cols));
  const double inv = 1.0 / std_dev_;
  for (int64_t i = 0; i < batch_size_; ++i) {
    const size_t idx = order_[cursor_++];
    const std::vector<float>& w = set_.windows[idx];
    float* dst = batch.values.data() + size_t(i) * w.size();
    for (size_t j = 0; j < w.size(); ++j) {
      dst[j] = float((double(w[j]) - mean_) * inv);
    }
    batch.names.push_back(set_.names[idx]);
  }
  return batch;
}

}  // namespace specstyle::corpus

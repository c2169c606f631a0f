#include "specstyle/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "specstyle/crc32.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace specstyle::ckpt {

namespace {

using Kind = CheckpointError::Kind;

constexpr char kMagic[4] = {'A', 'S', 'T', 'W'};
constexpr uint32_t kVersion = 1;
constexpr uint64_t kMaxRank = 8;
constexpr uint64_t kMaxElements = uint64_t(1) << 31;  // sanity cap per tensor

void put_u32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_u64(std::string& out, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

struct Cursor {
  const uint8_t* p;
  size_t len;
  size_t off = 0;

  void need(size_t n) const {
    if (off + n > len) {
      throw CheckpointError(Kind::truncated, "checkpoint file is truncated");
    }
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, p + off, 4);
    off += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, p + off, 8);
    off += 8;
    return v;
  }
  uint8_t u8() {
    need(1);
    return p[off++];
  }
  const uint8_t* bytes(size_t n) {
    need(n);
    const uint8_t* r = p + off;
    off += n;
    return r;
  }
};

}  // namespace

void write_tensor_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, uint32_t(tensors.size()));
  uint32_t crc = 0;
  for (const auto& t : tensors) {
    const int64_t n = numel_of(t.dims);
    if (n != int64_t(t.data.size())) {
      throw CheckpointError(Kind::shape_mismatch,
                            "tensor " + t.name + " payload does not match its dims");
    }
    put_u32(out, uint32_t(t.name.size()));
    out.append(t.name);
    out.push_back(char(t.dims.size()));
    for (int64_t d : t.dims) put_u64(out, uint64_t(d));
    const size_t nbytes = t.data.size() * sizeof(float);
    out.append(reinterpret_cast<const char*>(t.data.data()), nbytes);
    crc = crc32(t.data.data(), nbytes, crc);
  }
  put_u32(out, crc);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError(Kind::io, "cannot open " + path + " for writing");
  f.write(out.data(), std::streamsize(out.size()));
  f.flush();
  if (!f) throw CheckpointError(Kind::io, "failed writing " + path);
}

std::vector<NamedTensor> read_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw CheckpointError(Kind::io, "cannot open " + path);
  const std::streamsize size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  if (size > 0) f.read(reinterpret_cast<char*>(buf.data()), size);
  if (!f) throw CheckpointError(Kind::io, "failed reading " + path);

  Cursor cur{buf.data(), buf.size()};
  const uint8_t* magic = cur.bytes(4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError(Kind::bad_magic, path + ": not a checkpoint file");
  }
  const uint32_t version = cur.u32();
  if (version != kVersion) {
    throw CheckpointError(Kind::bad_version,
                          path + ": unsupported version " + std::to_string(version));
  }
  const uint32_t count = cur.u32();
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  uint32_t crc = 0;
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const uint32_t name_len = cur.u32();
    if (name_len > cur.len - cur.off) {
      throw CheckpointError(Kind::truncated, path + ": truncated tensor name");
    }
    t.name.assign(reinterpret_cast<const char*>(cur.bytes(name_len)), name_len);
    const uint8_t rank = cur.u8();
    if (rank > kMaxRank) {
      throw CheckpointError(Kind::truncated, path + ": implausible tensor rank");
    }
    uint64_t n = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      const uint64_t dim = cur.u64();
      if (dim == 0 || dim > kMaxElements || n > kMaxElements / dim) {
        throw CheckpointError(Kind::truncated, path + ": implausible tensor dims");
      }
      n *= dim;
      t.dims.push_back(int64_t(dim));
    }
    const size_t nbytes = size_t(n) * sizeof(float);
    const uint8_t* payload = cur.bytes(nbytes);
    t.data.resize(size_t(n));
    std::memcpy(t.data.data(), payload, nbytes);
    crc = crc32(payload, nbytes, crc);
    tensors.push_back(std::move(t));
  }
  const uint32_t stored_crc = cur.u32();
  if (cur.off != cur.len) {
    throw CheckpointError(Kind::truncated, path + ": trailing bytes after checkpoint");
  }
  if (stored_crc != crc) {
    throw CheckpointError(Kind::bad_crc, path + ": checksum mismatch");
  }
  return tensors;
}

}  // namespace specstyle::ckpt

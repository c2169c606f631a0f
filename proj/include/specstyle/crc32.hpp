// include/specstyle/crc32.hpp

#pragma once

#include <cstddef>
#include <cstdint>

namespace specstyle {

// Standard CRC-32 (reflected polynomial 0xEDB88320), as used by gzip and PNG.
// Feed chunks by passing the previous return value as `seed`.
uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

}  // namespace specstyle

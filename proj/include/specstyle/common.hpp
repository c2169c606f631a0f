// include/specstyle/common.hpp
//
// Shared error types and small helpers used across the library.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace specstyle {

// Malformed tensor/audio geometry (mismatched dims, bad layer wiring).
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument values (non-positive epsilon, bad iteration counts, ...).
class ValueError : public std::runtime_error {
 public:
  explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// File-level failures (missing files, short reads, unwritable paths).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline int64_t numel_of(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int64_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace specstyle

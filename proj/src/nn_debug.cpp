#include <atomic>

#include "specstyle/tensor.hpp"

namespace specstyle::nn {

namespace {
std::atomic<bool> g_check_finite{false};
}

void set_debug_check_finite(bool enabled) { g_check_finite.store(enabled); }
bool debug_check_finite() { return g_check_finite.load(); }

}  // namespace specstyle::nn

#include <atomic>
#include <cstdlib>
#include <string>

#include "alcorpus/errors.hpp"
#include "alcorpus/kernels.hpp"

namespace alcorpus::kernels {
namespace {

Backend detect() {
  if (const char* forced = std::getenv("ALCORPUS_SIMD")) {
    if (std::string(forced) == "scalar") return Backend::kScalar;
  }
  return avx2_supported() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported;
#else
  return false;
#endif
}

#if !(defined(__x86_64__) || defined(__i386__))
const KernelTable& avx2_table() { return scalar_table(); }
#endif

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (backend == Backend::kAvx2 && !avx2_supported()) {
    throw ValidationError("AVX2 backend requested but the CPU lacks AVX2/FMA");
  }
  current().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

const KernelTable& active() {
  return active_backend() == Backend::kAvx2 ? avx2_table() : scalar_table();
}

}  // namespace alcorpus::kernels

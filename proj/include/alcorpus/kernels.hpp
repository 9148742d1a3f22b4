#pragma once

// Dense arithmetic kernels used by the distance, density and network code.
//
// Two implementations exist: a portable scalar reference and an AVX2+FMA
// variant. The variant is chosen once at startup from CPUID; setting the
// environment variable ALCORPUS_SIMD=scalar forces the reference path.
// Both paths agree to rounding (see tests/kernels_test.cpp); they are not
// bit-identical because the vector path reassociates sums.

#include <cstddef>
#include <span>
#include <string_view>

namespace alcorpus::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[r] = ||query - rows[r]||^2 for row-major rows[n_rows x dim].
  void (*squared_distances)(const double* query, const double* rows, std::size_t n_rows,
                            std::size_t dim, double* out);
  // y = W x + b, W row-major [n_out x n_in]; b may be null.
  void (*affine)(const double* w, const double* b, const double* x, std::size_t n_out,
                 std::size_t n_in, double* y);
  // x_grad += W^T y_grad, W row-major [n_out x n_in].
  void (*affine_transpose_accumulate)(const double* w, const double* y_grad, std::size_t n_out,
                                      std::size_t n_in, double* x_grad);
};

const KernelTable& scalar_table();
// Only valid when avx2_supported() is true.
const KernelTable& avx2_table();
bool avx2_supported();

Backend active_backend();
// Overrides the startup choice; throws ValidationError if kAvx2 is requested
// on a CPU without it.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void squared_distances(std::span<const double> query, std::span<const double> rows,
                              std::span<double> out) {
  active().squared_distances(query.data(), rows.data(), out.size(), query.size(), out.data());
}

// RAII override of the active backend, restoring the previous one on exit.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend) : previous_(active_backend()) { set_backend(backend); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

}  // namespace alcorpus::kernels

#include "alcorpus/kernels.hpp"

namespace alcorpus::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void squared_distances(const double* query, const double* rows, std::size_t n_rows,
                       std::size_t dim, double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = squared_distance(query, rows + r * dim, dim);
}

void affine(const double* w, const double* b, const double* x, std::size_t n_out,
            std::size_t n_in, double* y) {
  for (std::size_t o = 0; o < n_out; ++o) {
    y[o] = (b ? b[o] : 0.0) + dot(w + o * n_in, x, n_in);
  }
}

void affine_transpose_accumulate(const double* w, const double* y_grad, std::size_t n_out,
                                 std::size_t n_in, double* x_grad) {
  for (std::size_t o = 0; o < n_out; ++o) axpy(y_grad[o], w + o * n_in, x_grad, n_in);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot, squared_distance, axpy, squared_distances, affine,
                                 affine_transpose_accumulate};
  return table;
}

}  // namespace alcorpus::kernels

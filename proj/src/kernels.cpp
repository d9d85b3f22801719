#include "histel/kernels.hpp"

#include <mutex>

#include <omp.h>

#include "histel/errors.hpp"

namespace histel::kernels {

namespace {

void CheckShapes(const EmbeddingIndex& index, std::span<const float> query, std::span<double> out) {
  if (query.size() != index.dimension() && index.size() > 0) {
    throw DataError("query dimension " + std::to_string(query.size()) +
                    " does not match index dimension " + std::to_string(index.dimension()));
  }
  if (out.size() != index.size()) throw DataError("score buffer size mismatch");
}

inline double RowDot(const float* row, const float* q, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) s += static_cast<double>(row[d]) * q[d];
  return s;
}

}  // namespace

void DenseScoresSerial(const EmbeddingIndex& index, std::span<const float> query,
                       std::span<double> out) {
  CheckShapes(index, query, out);
  const std::size_t dim = index.dimension();
  const float* base = index.values().data();
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = RowDot(base + r * dim, query.data(), dim);
}

void DenseScoresParallel(const EmbeddingIndex& index, std::span<const float> query,
                         std::span<double> out) {
  CheckShapes(index, query, out);
  const std::size_t dim = index.dimension();
  const float* base = index.values().data();
  const float* q = query.data();
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  double* dst = out.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) dst[r] = RowDot(base + r * dim, q, dim);
}

void ParallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  // Keep the exception of the lowest failing index so errors are reproducible.
  std::exception_ptr first;
  std::size_t first_index = n;
  std::mutex mu;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (static_cast<std::size_t>(i) < first_index) {
        first_index = static_cast<std::size_t>(i);
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

int MaxThreads() { return omp_get_max_threads(); }

}  // namespace histel::kernels

#include "stt/parallel.hpp"

#include <omp.h>

#include <vector>

namespace stt {

void par_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const long long n = static_cast<long long>(count);
  if (workers > 0) {
#pragma omp parallel for schedule(static) num_threads(workers)
    for (long long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
  }
}

void seq_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  for (std::size_t i = 0; i < count; ++i) fn(i);
}

double pairwise_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

}  // namespace stt

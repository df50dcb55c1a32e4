#include "mest/kernels.hpp"

namespace mest::kernels {

double pairwise_mean_distance_serial(std::span<const double> points, std::size_t dim,
                                     double beta) {
  const std::size_t m = points.size() / dim;
  CompensatedSum acc;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      acc.add(distance_pow(points.subspan(j * dim, dim), points.subspan(k * dim, dim), beta));
    }
  }
  return acc.value() / (static_cast<double>(m) * static_cast<double>(m));
}

double pairwise_mean_distance_parallel(std::span<const double> points, std::size_t dim,
                                       double beta) {
  const std::size_t m = points.size() / dim;
  // Row j holds sum_{k > j}; the diagonal is zero and the rest is symmetric.
  std::vector<double> rows(m, 0.0);
  const auto count = static_cast<long long>(m);
#pragma omp parallel for schedule(dynamic, 16) if (m >= 256)
  for (long long jj = 0; jj < count; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    CompensatedSum acc;
    const auto pj = points.subspan(j * dim, dim);
    for (std::size_t k = j + 1; k < m; ++k) acc.add(distance_pow(pj, points.subspan(k * dim, dim), beta));
    rows[j] = acc.value();
  }
  CompensatedSum total;
  for (double r : rows) total.add(r);
  return 2.0 * total.value() / (static_cast<double>(m) * static_cast<double>(m));
}

double mean_distance_to(std::span<const double> points, std::size_t dim,
                        std::span<const double> y, double beta) {
  const std::size_t m = points.size() / dim;
  CompensatedSum acc;
  for (std::size_t j = 0; j < m; ++j) acc.add(distance_pow(points.subspan(j * dim, dim), y, beta));
  return acc.value() / static_cast<double>(m);
}

}  // namespace mest::kernels

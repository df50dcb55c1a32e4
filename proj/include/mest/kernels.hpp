#pragma once

// Data-parallel reductions used by the criterion and the scoring rules.
//
// Each kernel comes in two flavours: *_serial is the reference implementation
// kept for testing and benchmarking, *_parallel is the OpenMP version. The
// parallel reductions use a fixed chunk size independent of the thread count
// and merge the chunk partials in index order, so their result is bitwise
// reproducible for any number of threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mest::kernels {

inline constexpr std::size_t kChunk = 1024;
inline constexpr std::size_t kParallelThreshold = 4 * kChunk;

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Outcome of summing extended-real terms in [-inf, inf).
struct ReductionResult {
  double sum = 0.0;
  bool has_neg_inf = false;
  bool has_invalid = false;  // NaN or +inf seen
  std::size_t first_invalid = 0;

  /// Mean over n terms; -inf if any term was -inf, NaN if any was invalid.
  [[nodiscard]] double mean(std::size_t n) const {
    if (has_invalid) return std::numeric_limits<double>::quiet_NaN();
    if (has_neg_inf) return -std::numeric_limits<double>::infinity();
    return sum / static_cast<double>(n);
  }
};

namespace detail {

template <class Term>
ReductionResult reduce_range(std::size_t begin, std::size_t end, Term& term) {
  ReductionResult r;
  CompensatedSum acc;
  for (std::size_t i = begin; i < end; ++i) {
    const double v = term(i);
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      if (!r.has_invalid) r.first_invalid = i;
      r.has_invalid = true;
      break;
    }
    if (v == -std::numeric_limits<double>::infinity()) {
      r.has_neg_inf = true;
      continue;
    }
    acc.add(v);
  }
  r.sum = acc.value();
  return r;
}

}  // namespace detail

/// Reference reduction: one sequential pass, chunked exactly like the
/// parallel version so both agree bit for bit.
template <class Term>
ReductionResult sum_terms_serial(std::size_t n, Term&& term) {
  ReductionResult total;
  CompensatedSum acc;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    const ReductionResult part = detail::reduce_range(begin, end, term);
    if (part.has_invalid) {
      if (!total.has_invalid) total.first_invalid = part.first_invalid;
      total.has_invalid = true;
      break;
    }
    total.has_neg_inf = total.has_neg_inf || part.has_neg_inf;
    acc.add(part.sum);
  }
  total.sum = acc.value();
  return total;
}

/// Plain single-accumulator reduction, used only as an independent check of
/// the chunked versions.
template <class Term>
ReductionResult sum_terms_flat(std::size_t n, Term&& term) {
  return detail::reduce_range(0, n, term);
}

template <class Term>
ReductionResult sum_terms_parallel(std::size_t n, Term&& term) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<ReductionResult> parts(chunks);
  std::exception_ptr error;
  const bool go_parallel = n >= kParallelThreshold;
  const auto count = static_cast<long long>(chunks);
#pragma omp parallel for schedule(static) if (go_parallel)
  for (long long c = 0; c < count; ++c) {
    try {
      const auto begin = static_cast<std::size_t>(c) * kChunk;
      parts[static_cast<std::size_t>(c)] =
          detail::reduce_range(begin, std::min(n, begin + kChunk), term);
    } catch (...) {
#pragma omp critical(mest_kernel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  ReductionResult total;
  CompensatedSum acc;
  for (const auto& part : parts) {
    if (part.has_invalid) {
      if (!total.has_invalid) total.first_invalid = part.first_invalid;
      total.has_invalid = true;
      break;
    }
    total.has_neg_inf = total.has_neg_inf || part.has_neg_inf;
    acc.add(part.sum);
  }
  total.sum = acc.value();
  return total;
}

/// (1 / m^2) sum_{j,k} ||s_j - s_k||^beta over m points stored row-major with
/// dimension dim.
[[nodiscard]] double pairwise_mean_distance_serial(std::span<const double> points,
                                                   std::size_t dim, double beta);
[[nodiscard]] double pairwise_mean_distance_parallel(std::span<const double> points,
                                                     std::size_t dim, double beta);

/// (1 / m) sum_j ||s_j - y||^beta.
[[nodiscard]] double mean_distance_to(std::span<const double> points, std::size_t dim,
                                      std::span<const double> y, double beta);

/// Euclidean distance raised to beta; beta == 1 skips the pow call.
[[nodiscard]] inline double distance_pow(std::span<const double> a, std::span<const double> b,
                                         double beta) {
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    ss += d * d;
  }
  if (a.size() == 1) {
    const double ad = std::sqrt(ss);
    return beta == 1.0 ? ad : std::pow(ad, beta);
  }
  return beta == 2.0 ? ss : std::pow(ss, 0.5 * beta);
}

}  // namespace mest::kernels

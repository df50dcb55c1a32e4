#pragma once

// M-estimation over a compact box: the sample criterion
//   M_n(eta) = (1/n) sum_i m_eta(Z_{n,i}),
// which may equal -inf, and a maximizer that treats -inf as infeasible.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mest/designs.hpp"
#include "mest/scoring.hpp"

namespace mest {

/// Product of closed intervals [lower_k, upper_k] with the Euclidean metric.
class BoxDomain {
 public:
  BoxDomain(std::vector<double> lower, std::vector<double> upper);

  [[nodiscard]] std::size_t dim() const { return lower_.size(); }
  [[nodiscard]] const std::vector<double>& lower() const { return lower_; }
  [[nodiscard]] const std::vector<double>& upper() const { return upper_; }

  [[nodiscard]] bool contains(std::span<const double> eta) const;
  [[nodiscard]] std::vector<double> clip(std::span<const double> eta) const;
  [[nodiscard]] double distance(std::span<const double> a, std::span<const double> b) const;
  /// True if some coordinate is within tol * width of a face.
  [[nodiscard]] bool on_boundary(std::span<const double> eta, double tol = 1e-9) const;
  /// Regular lattice with points_per_dim points per axis (endpoints included),
  /// enumerated in lexicographic order.
  [[nodiscard]] std::vector<std::vector<double>> lattice(std::size_t points_per_dim) const;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
};

/// m_eta(Z_{n,i}) for i < n. Terms lie in [-inf, inf); NaN or +inf is a bug in
/// the term and raises NonFiniteCriterionError.
struct Criterion {
  std::size_t n = 0;
  std::function<double(std::span<const double> eta, std::size_t i)> term;
  std::optional<BoxDomain> domain;
  bool parallel = true;
};

/// Exact average of the terms with compensated summation; -inf if any term is.
[[nodiscard]] double criterion_value(const Criterion& crit, std::span<const double> eta);

using Objective = std::function<double(std::span<const double> eta)>;

struct MaximizeConfig {
  std::size_t lattice_points = 9;
  /// Local refinements start from this many of the best lattice points.
  std::size_t starts = 3;
  std::size_t max_iterations = 200;
  /// Simplex diameter at which a local refinement stops.
  double tolerance = 1e-6;
  /// Simplex rebuilds around the incumbent after convergence.
  std::size_t restarts = 2;
  bool parallel = true;
};

enum class FitStatus { success, degenerate };

struct TracePoint {
  std::vector<double> eta;
  double value = 0.0;
};

struct FitResult {
  std::vector<double> eta_hat;
  double criterion_value = 0.0;
  std::size_t evaluations = 0;
  /// Successive incumbents; values are nondecreasing.
  std::vector<TracePoint> trace;
  bool feasible_start_found = false;
  bool on_boundary = false;
  FitStatus status = FitStatus::degenerate;
  std::optional<double> reference_value;
};

[[nodiscard]] std::string to_string(FitStatus status);

/// Lattice search followed by Nelder-Mead refinement clipped to the box.
/// If a reference point is given it is evaluated and used as an extra start,
/// so the returned value is never below the reference value.
[[nodiscard]] FitResult maximize(const Objective& f, const BoxDomain& box,
                                 const MaximizeConfig& cfg = {},
                                 std::optional<std::vector<double>> reference = std::nullopt);
[[nodiscard]] FitResult maximize(const Criterion& crit, const BoxDomain& box,
                                 const MaximizeConfig& cfg = {},
                                 std::optional<std::vector<double>> reference = std::nullopt);

/// m_eta(x, y) = log p_{theta(x, eta)}(y). The criterion keeps its own copy of link and data.
[[nodiscard]] Criterion log_score_criterion(const LinkSpec& link, const DesignRow& data);

/// m_eta(x, y) = S(P_{theta(x, eta)}, y). Energy scores use per-observation
/// base variates drawn once from seed and reused for every eta.
[[nodiscard]] Criterion score_criterion(const ScoringRule& rule, const LinkSpec& link,
                                        const DesignRow& data, std::uint64_t seed);

[[nodiscard]] FitResult fit_mle(const LinkSpec& link, const DesignRow& data,
                                const BoxDomain& box, const MaximizeConfig& cfg = {},
                                std::optional<std::vector<double>> reference = std::nullopt);

[[nodiscard]] FitResult fit_optimum_score(const ScoringRule& rule, const LinkSpec& link,
                                          const DesignRow& data, const BoxDomain& box,
                                          const MaximizeConfig& cfg, std::uint64_t seed,
                                          std::optional<std::vector<double>> reference = std::nullopt);

}  // namespace mest

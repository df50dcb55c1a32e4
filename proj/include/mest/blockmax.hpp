#pragma once

// Heteroscedastic heavy-tailed block maxima and the Frechet regression
// pseudo-likelihood fit.
//
// Underlying observations at covariate x have cdf F_x = F0^{c(x)} with
// c(x) = sigma_{beta0}(x)^{alpha0}, where F0 lies in the Frechet max-domain of
// attraction with index alpha0. A block maximum over r draws then has cdf
// F0^{c(x) r}, which the sampler inverts directly.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mest/designs.hpp"
#include "mest/estimator.hpp"

namespace mest {

enum class BaselineKind {
  /// F0(y) = 1 - y^-alpha on y >= 1; a_r = r^(1/alpha).
  pareto,
  /// F0(y) = 1 - y^-alpha / log(e + y) above its lower endpoint; a_r by
  /// numeric quantile inversion. Carries a genuine domain-of-attraction error.
  perturbed_pareto,
};

class TailBaseline {
 public:
  TailBaseline(BaselineKind kind, double alpha);

  [[nodiscard]] BaselineKind kind() const { return kind_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] double lower_endpoint() const { return lower_; }
  [[nodiscard]] std::string name() const;

  [[nodiscard]] double cdf(double y) const;
  /// log F0(y), accurate in the upper tail; -inf at or below the lower endpoint.
  [[nodiscard]] double log_cdf(double y) const;
  /// y with 1 - F0(y) = q, for q in (0, 1].
  [[nodiscard]] double upper_quantile(double q) const;
  /// a_r = F0^{-1}(1 - 1/r).
  [[nodiscard]] double norming(double r) const;

 private:
  [[nodiscard]] double tail(double y) const;

  BaselineKind kind_;
  double alpha_;
  double lower_ = 1.0;
};

[[nodiscard]] TailBaseline pareto_baseline(double alpha);
[[nodiscard]] TailBaseline perturbed_pareto_baseline(double alpha);

/// sigma_beta(x) > 0, continuous in (x, beta).
using ScaleLink = std::function<double(std::span<const double> x, std::span<const double> beta)>;

/// sigma_beta(x) = exp(beta^T x).
[[nodiscard]] ScaleLink loglinear_scale_link();
/// sigma_beta(x) = exp(beta[0]) regardless of x; beta is not identifiable
/// jointly with the overall scale.
[[nodiscard]] ScaleLink covariate_free_scale_link();

struct TailModel {
  TailBaseline baseline;
  ScaleLink sigma;
  std::vector<double> beta0;

  [[nodiscard]] double alpha0() const { return baseline.alpha(); }
  /// c(x) = sigma_{beta0}(x)^alpha0.
  [[nodiscard]] double c(std::span<const double> x) const;
};

/// F_x(y) = F0(y)^{c(x)}.
[[nodiscard]] double hetero_cdf(const TailModel& model, std::span<const double> x, double y);

struct BlockMaxRow {
  std::size_t n = 0;
  std::size_t block_size = 1;
  CovariateMatrix covariates;
  std::vector<double> maxima;
  std::uint64_t seed = 0;
};

/// M_{n,i} = max of r i.i.d. draws from F_{x_{n,i}}. The default path draws
/// one uniform per block and inverts F_x^r; materialize = true draws all r
/// underlying observations instead (for validation only).
[[nodiscard]] BlockMaxRow sample_block_maxima(const TailModel& model, const CovariateDesign& design,
                                              std::size_t n, std::size_t block_size,
                                              std::uint64_t seed, bool materialize = false);

/// ceil((log n)^2), at least 1.
[[nodiscard]] std::size_t log_squared_block_size(std::size_t n);

/// L_n(tau, beta, alpha) = (1/n) sum_i log p_{tau sigma_beta(x_i), alpha}(M_i).
[[nodiscard]] double frechet_loglik(double tau, std::span<const double> beta, double alpha,
                                    const BlockMaxRow& row, const ScaleLink& sigma);

/// Lower sample median of the maxima.
[[nodiscard]] double median_scaling(const BlockMaxRow& row);

struct FrechetFitConfig {
  std::pair<double, double> alpha_range{0.3, 5.0};
  std::vector<double> beta_lower{-3.0};
  std::vector<double> beta_upper{3.0};
  /// Search interval for gamma = tau / scaling.
  std::pair<double, double> gamma_range{0.2, 5.0};
  MaximizeConfig optimizer{};
};

struct FrechetFit {
  double alpha_hat = 0.0;
  std::vector<double> beta_hat;
  double tau_hat = 0.0;
  double gamma_hat = 0.0;
  double scaling_used = 0.0;
  double gamma_lower = 0.0;
  double gamma_upper = 0.0;
  FitResult fit;
};

/// Maximizes L_n over A x B x [gamma_- s, gamma_+ s] with s = scaling. The
/// optimizer works on (alpha, beta, log gamma); ranges with lower == upper are
/// held fixed. If reference = (alpha, beta, gamma) is given and inside the
/// search set, the fit dominates it.
[[nodiscard]] FrechetFit fit_frechet(const BlockMaxRow& row, const ScaleLink& sigma, double scaling,
                                     const FrechetFitConfig& cfg,
                                     std::optional<std::vector<double>> reference = std::nullopt);

struct MinMaximaEntry {
  std::size_t n = 0;
  std::size_t block_size = 0;
  std::vector<double> min_maxima;  // one per replication
  double median_min = 0.0;
  double exceedance_frequency = 0.0;  // fraction of reps with min <= y
  double standard_error = 0.0;
  double sup_cdf = 0.0;  // sup over the row's covariates of F_x(y)
  double analytic_bound = 0.0;  // n * sup_cdf^r
  bool bound_violated = false;
};

struct MinMaximaReport {
  double y = 0.0;
  std::vector<MinMaximaEntry> entries;

  [[nodiscard]] bool any_violation() const;
  /// Median minimum is nondecreasing along the schedule and ends above y.
  [[nodiscard]] bool diverging() const;
};

[[nodiscard]] MinMaximaReport check_min_maxima_divergence(
    const TailModel& model, const CovariateDesign& design,
    const std::vector<std::pair<std::size_t, std::size_t>>& schedule, std::size_t reps, double y,
    std::uint64_t seed);

struct DoaEntry {
  std::size_t block_size = 0;
  std::vector<double> sup_error_per_y;  // sup over the x grid, for each grid y
  double sup_error = 0.0;               // max over the y grid
};

struct DoaReport {
  std::vector<double> y_grid;
  std::vector<DoaEntry> entries;

  /// Sup error strictly decreases along the block-size schedule.
  [[nodiscard]] bool strictly_decreasing() const;
};

/// sup_x |F_x^r(a_r y) - Phi_alpha(y / sigma(x))| with sigma(x) = c(x)^(1/alpha),
/// evaluated exactly from the closed-form cdfs.
[[nodiscard]] DoaReport check_doa_uniform(const TailModel& model,
                                          const std::vector<std::vector<double>>& x_grid,
                                          const std::vector<double>& y_grid,
                                          const std::vector<std::size_t>& block_sizes);

}  // namespace mest

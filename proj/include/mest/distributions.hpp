#pragma once

// Parametric families with parameter-dependent supports.
//
// Log-densities return -inf (IEEE) outside the support, so sums of log-density
// terms propagate -inf without any sentinel handling. +inf is never returned.
// Every sampler is inverse-cdf based: a draw is from_base(theta, base_variate(u))
// for a single uniform u, where base_variate does not depend on theta. Callers
// that need common random numbers across parameters keep the base variates.

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "mest/random.hpp"

namespace mest {

/// |xi| at or below this value routes GEV/GP evaluation to the xi = 0 branch.
inline constexpr double kXiZeroTol = 1e-8;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

struct GpParams {
  double a = 1.0;
  double xi = 0.0;
};

struct FrechetParams {
  double tau = 1.0;
  double alpha = 1.0;
};

struct NormalParams {
  double mean = 0.0;
  double sd = 1.0;
};

// GEV(mu, sigma, xi). Support {y : sigma + xi (y - mu) > 0}.
[[nodiscard]] double gev_logpdf(const GevParams& theta, double y);
[[nodiscard]] double gev_cdf(const GevParams& theta, double y);
[[nodiscard]] double gev_quantile(const GevParams& theta, double p);
[[nodiscard]] std::vector<double> gev_sample(const GevParams& theta, RandomStream& rng,
                                             std::size_t count);
/// d/d(mu, sigma, xi) of gev_logpdf; requires y inside the support.
[[nodiscard]] std::array<double, 3> gev_logpdf_gradient(const GevParams& theta, double y);

// Generalized Pareto(a, xi) on (0, inf), upper endpoint -a/xi when xi < 0.
[[nodiscard]] double gp_logpdf(const GpParams& theta, double y);
[[nodiscard]] double gp_cdf(const GpParams& theta, double y);
[[nodiscard]] double gp_quantile(const GpParams& theta, double p);
[[nodiscard]] std::vector<double> gp_sample(const GpParams& theta, RandomStream& rng,
                                            std::size_t count);
[[nodiscard]] std::array<double, 2> gp_logpdf_gradient(const GpParams& theta, double y);

// Frechet(tau, alpha): cdf exp(-(y/tau)^-alpha) for y > 0.
[[nodiscard]] double frechet_logpdf(const FrechetParams& theta, double y);
[[nodiscard]] double frechet_cdf(const FrechetParams& theta, double y);
[[nodiscard]] double frechet_quantile(const FrechetParams& theta, double p);
[[nodiscard]] std::vector<double> frechet_sample(const FrechetParams& theta, RandomStream& rng,
                                                 std::size_t count);
[[nodiscard]] std::array<double, 2> frechet_logpdf_gradient(const FrechetParams& theta, double y);

[[nodiscard]] double normal_logpdf(const NormalParams& theta, double y);
[[nodiscard]] double normal_cdf(const NormalParams& theta, double y);
[[nodiscard]] double normal_quantile(const NormalParams& theta, double p);
[[nodiscard]] std::vector<double> normal_sample(const NormalParams& theta, RandomStream& rng,
                                                std::size_t count);
[[nodiscard]] std::array<double, 2> normal_logpdf_gradient(const NormalParams& theta, double y);

enum class FamilyKind { normal, gev, gp, frechet, point_mass };

/// Natural parameter of any family, padded to three slots:
///   normal (mean, sd), gev (mu, sigma, xi), gp (a, xi), frechet (tau, alpha),
///   point_mass (location).
using Theta = std::array<double, 3>;

/// Runtime dispatch over the built-in families, keyed on the padded Theta.
class Family {
 public:
  constexpr explicit Family(FamilyKind kind) : kind_(kind) {}

  [[nodiscard]] constexpr FamilyKind kind() const { return kind_; }
  [[nodiscard]] std::string_view name() const;
  [[nodiscard]] std::size_t parameter_count() const;
  static std::optional<Family> from_name(std::string_view name);

  [[nodiscard]] bool valid(const Theta& theta) const;
  /// Stricter check for estimation: additionally xi > -1 for GEV and GP.
  [[nodiscard]] bool valid_for_estimation(const Theta& theta) const;

  [[nodiscard]] double log_density(const Theta& theta, double y) const;
  [[nodiscard]] double cdf(const Theta& theta, double y) const;
  [[nodiscard]] double quantile(const Theta& theta, double p) const;
  [[nodiscard]] Theta log_density_gradient(const Theta& theta, double y) const;

  /// Open support interval (lower, upper); point masses return (a, a).
  [[nodiscard]] std::pair<double, double> support(const Theta& theta) const;

  /// Theta-free half of the inverse cdf.
  [[nodiscard]] double base_variate(double u) const;
  /// Maps a base variate to a draw from the family at theta. No validation;
  /// callers validate theta once per parameter, not per draw.
  [[nodiscard]] double from_base(const Theta& theta, double base) const;

  [[nodiscard]] double sample(const Theta& theta, RandomStream& rng) const;
  [[nodiscard]] std::vector<double> sample(const Theta& theta, RandomStream& rng,
                                           std::size_t count) const;

  friend constexpr bool operator==(Family, Family) = default;

 private:
  FamilyKind kind_;
};

}  // namespace mest

#include "mest/distributions.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "mest/error.hpp"

namespace mest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite_y(double y) {
  if (!std::isfinite(y)) throw DomainError("observation must be finite, got " + std::to_string(y));
}

void require_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("probability must lie in (0, 1), got " + std::to_string(p));
}

void validate(const GevParams& t) {
  if (!std::isfinite(t.mu) || !std::isfinite(t.xi) || !(t.sigma > 0.0) || !std::isfinite(t.sigma))
    throw DomainError("invalid GEV parameters: require finite mu, xi and sigma > 0");
}

void validate(const GpParams& t) {
  if (!std::isfinite(t.xi) || !(t.a > 0.0) || !std::isfinite(t.a))
    throw DomainError("invalid GP parameters: require finite xi and a > 0");
}

void validate(const FrechetParams& t) {
  if (!(t.tau > 0.0) || !(t.alpha > 0.0) || !std::isfinite(t.tau) || !std::isfinite(t.alpha))
    throw DomainError("invalid Frechet parameters: require tau > 0 and alpha > 0");
}

void validate(const NormalParams& t) {
  if (!std::isfinite(t.mean) || !(t.sd > 0.0) || !std::isfinite(t.sd))
    throw DomainError("invalid Normal parameters: require finite mean and sd > 0");
}

bool xi_is_zero(double xi) { return std::abs(xi) <= kXiZeroTol; }

// Unchecked kernels shared by the typed API and Family dispatch.

// Finite endpoint mu - sigma / xi, computed exactly as Family::support does so
// the documented endpoint itself is classified as outside the support.
bool gev_outside(const GevParams& t, double y) {
  const double ep = t.mu - t.sigma / t.xi;
  return t.xi > 0.0 ? y <= ep : y >= ep;
}

double gev_logpdf_raw(const GevParams& t, double y) {
  const double z = (y - t.mu) / t.sigma;
  if (xi_is_zero(t.xi)) return -std::log(t.sigma) - z - std::exp(-z);
  if (gev_outside(t, y)) return kNegInf;
  const double s = t.xi * z;
  if (s <= -1.0) return kNegInf;
  // log(1 + xi z) / xi via log1p keeps small-|xi| evaluation accurate.
  const double lt = std::log1p(s) / t.xi;
  return -std::log(t.sigma) - (1.0 + t.xi) * lt - std::exp(-lt);
}

double gev_cdf_raw(const GevParams& t, double y) {
  const double z = (y - t.mu) / t.sigma;
  if (xi_is_zero(t.xi)) return std::exp(-std::exp(-z));
  if (gev_outside(t, y)) return t.xi > 0.0 ? 0.0 : 1.0;
  const double s = t.xi * z;
  if (s <= -1.0) return t.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::exp(-std::log1p(s) / t.xi));
}

double gev_from_base(const GevParams& t, double e) {
  const double log_e = std::log(e);
  if (xi_is_zero(t.xi)) return t.mu - t.sigma * log_e;
  return t.mu + t.sigma * std::expm1(-t.xi * log_e) / t.xi;
}

double gp_logpdf_raw(const GpParams& t, double y) {
  if (y <= 0.0) return kNegInf;
  if (xi_is_zero(t.xi)) return -std::log(t.a) - y / t.a;
  if (t.xi < 0.0 && y >= -t.a / t.xi) return kNegInf;
  const double s = t.xi * y / t.a;
  if (s <= -1.0) return kNegInf;
  return -std::log(t.a) - (1.0 + t.xi) * std::log1p(s) / t.xi;
}

double gp_cdf_raw(const GpParams& t, double y) {
  if (y <= 0.0) return 0.0;
  if (xi_is_zero(t.xi)) return -std::expm1(-y / t.a);
  if (t.xi < 0.0 && y >= -t.a / t.xi) return 1.0;
  const double s = t.xi * y / t.a;
  if (s <= -1.0) return 1.0;
  return -std::expm1(-std::log1p(s) / t.xi);
}

double gp_from_base(const GpParams& t, double e) {
  if (xi_is_zero(t.xi)) return t.a * e;
  return t.a * std::expm1(t.xi * e) / t.xi;
}

double frechet_logpdf_raw(const FrechetParams& t, double y) {
  if (y <= 0.0) return kNegInf;
  const double lr = std::log(y / t.tau);
  return std::log(t.alpha) - std::log(t.tau) - (t.alpha + 1.0) * lr - std::exp(-t.alpha * lr);
}

double frechet_cdf_raw(const FrechetParams& t, double y) {
  if (y <= 0.0) return 0.0;
  return std::exp(-std::exp(-t.alpha * std::log(y / t.tau)));
}

double frechet_from_base(const FrechetParams& t, double e) {
  return t.tau * std::exp(-std::log(e) / t.alpha);
}

double normal_logpdf_raw(const NormalParams& t, double y) {
  const double z = (y - t.mean) / t.sd;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(t.sd) - 0.5 * z * z;
}

double normal_cdf_raw(const NormalParams& t, double y) {
  return 0.5 * std::erfc(-(y - t.mean) / (t.sd * std::numbers::sqrt2));
}

double standard_normal_quantile(double u) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

double unit_exponential_lower(double u) { return -std::log(u); }
double unit_exponential_upper(double u) { return -std::log1p(-u); }

GevParams as_gev(const Theta& t) { return {t[0], t[1], t[2]}; }
GpParams as_gp(const Theta& t) { return {t[0], t[1]}; }
FrechetParams as_frechet(const Theta& t) { return {t[0], t[1]}; }
NormalParams as_normal(const Theta& t) { return {t[0], t[1]}; }

}  // namespace

// ---------------------------------------------------------------- GEV

double gev_logpdf(const GevParams& theta, double y) {
  validate(theta);
  require_finite_y(y);
  return gev_logpdf_raw(theta, y);
}

double gev_cdf(const GevParams& theta, double y) {
  validate(theta);
  if (std::isnan(y)) throw DomainError("observation must not be NaN");
  if (std::isinf(y)) return y > 0 ? 1.0 : 0.0;
  return gev_cdf_raw(theta, y);
}

double gev_quantile(const GevParams& theta, double p) {
  validate(theta);
  require_probability(p);
  return gev_from_base(theta, unit_exponential_lower(p));
}

std::vector<double> gev_sample(const GevParams& theta, RandomStream& rng, std::size_t count) {
  validate(theta);
  std::vector<double> out(count);
  for (auto& y : out) y = gev_from_base(theta, unit_exponential_lower(rng.uniform()));
  return out;
}

std::array<double, 3> gev_logpdf_gradient(const GevParams& theta, double y) {
  validate(theta);
  require_finite_y(y);
  const double z = (y - theta.mu) / theta.sigma;
  const double sigma = theta.sigma;
  if (xi_is_zero(theta.xi)) {
    const double w = std::exp(-z);
    return {(1.0 - w) / sigma, (-1.0 + z * (1.0 - w)) / sigma, -z + 0.5 * z * z * (1.0 - w)};
  }
  const double xi = theta.xi;
  const double s = 1.0 + xi * z;
  if (s <= 0.0) throw DomainError("gradient requested outside the GEV support");
  const double lt = std::log1p(xi * z) / xi;
  const double w = std::exp(-lt);
  const double dl_dz = (w - 1.0 - xi) / s;
  const double dlt_dxi = (z / s - lt) / xi;
  return {-dl_dz / sigma, -1.0 / sigma - z * dl_dz / sigma, -lt + (w - 1.0 - xi) * dlt_dxi};
}

// ---------------------------------------------------------------- GP

double gp_logpdf(const GpParams& theta, double y) {
  validate(theta);
  require_finite_y(y);
  return gp_logpdf_raw(theta, y);
}

double gp_cdf(const GpParams& theta, double y) {
  validate(theta);
  if (std::isnan(y)) throw DomainError("observation must not be NaN");
  if (std::isinf(y)) return y > 0 ? 1.0 : 0.0;
  return gp_cdf_raw(theta, y);
}

double gp_quantile(const GpParams& theta, double p) {
  validate(theta);
  require_probability(p);
  return gp_from_base(theta, unit_exponential_upper(p));
}

std::vector<double> gp_sample(const GpParams& theta, RandomStream& rng, std::size_t count) {
  validate(theta);
  std::vector<double> out(count);
  for (auto& y : out) y = gp_from_base(theta, unit_exponential_upper(rng.uniform()));
  return out;
}

std::array<double, 2> gp_logpdf_gradient(const GpParams& theta, double y) {
  validate(theta);
  require_finite_y(y);
  if (y <= 0.0) throw DomainError("gradient requested outside the GP support");
  const double a = theta.a;
  const double v = y / a;
  if (xi_is_zero(theta.xi)) return {-1.0 / a + y / (a * a), 0.5 * v * v - v};
  const double xi = theta.xi;
  const double s = 1.0 + xi * v;
  if (s <= 0.0) throw DomainError("gradient requested outside the GP support");
  return {-1.0 / a + (1.0 + xi) * y / (a * a * s),
          std::log1p(xi * v) / (xi * xi) - (1.0 + 1.0 / xi) * v / s};
}

// ---------------------------------------------------------------- Frechet

double frechet_logpdf(const FrechetParams& theta, double y) {
  validate(theta);
  require_finite_y(y);
  return frechet_logpdf_raw(theta, y);
}

double frechet_cdf(const FrechetParams& theta, double y) {
  validate(theta);
  if (std::isnan(y)) throw DomainError("observation must not be NaN");
  if (std::isinf(y)) return y > 0 ? 1.0 : 0.0;
  return frechet_cdf_raw(theta, y);
}

double frechet_quantile(const FrechetParams& theta, double p) {
  validate(theta);
  require_probability(p);
  return frechet_from_base(theta, unit_exponential_lower(p));
}

std::vector<double> frechet_sample(const FrechetParams& theta, RandomStream& rng,
                                   std::size_t count) {
  validate(theta);
  std::vector<double> out(count);
  for (auto& y : out) y = frechet_from_base(theta, unit_exponential_lower(rng.uniform()));
  return out;
}

std::array<double, 2> frechet_logpdf_gradient(const FrechetParams& theta, double y) {
  validate(theta);
  require_finite_y(y);
  if (y <= 0.0) throw DomainError("gradient requested outside the Frechet support");
  const double lr = std::log(y / theta.tau);
  const double w = std::exp(-theta.alpha * lr);
  return {theta.alpha * (1.0 - w) / theta.tau, 1.0 / theta.alpha - (1.0 - w) * lr};
}

// ---------------------------------------------------------------- Normal

double normal_logpdf(const NormalParams& theta, double y) {
  validate(theta);
  require_finite_y(y);
  return normal_logpdf_raw(theta, y);
}

double normal_cdf(const NormalParams& theta, double y) {
  validate(theta);
  if (std::isnan(y)) throw DomainError("observation must not be NaN");
  return normal_cdf_raw(theta, y);
}

double normal_quantile(const NormalParams& theta, double p) {
  validate(theta);
  require_probability(p);
  return theta.mean + theta.sd * standard_normal_quantile(p);
}

std::vector<double> normal_sample(const NormalParams& theta, RandomStream& rng,
                                  std::size_t count) {
  validate(theta);
  std::vector<double> out(count);
  for (auto& y : out) y = theta.mean + theta.sd * standard_normal_quantile(rng.uniform());
  return out;
}

std::array<double, 2> normal_logpdf_gradient(const NormalParams& theta, double y) {
  validate(theta);
  require_finite_y(y);
  const double z = (y - theta.mean) / theta.sd;
  return {z / theta.sd, (z * z - 1.0) / theta.sd};
}

// ---------------------------------------------------------------- Family

std::string_view Family::name() const {
  switch (kind_) {
    case FamilyKind::normal: return "normal";
    case FamilyKind::gev: return "gev";
    case FamilyKind::gp: return "gp";
    case FamilyKind::frechet: return "frechet";
    case FamilyKind::point_mass: return "point_mass";
  }
  return "unknown";
}

std::size_t Family::parameter_count() const {
  switch (kind_) {
    case FamilyKind::gev: return 3;
    case FamilyKind::point_mass: return 1;
    default: return 2;
  }
}

std::optional<Family> Family::from_name(std::string_view name) {
  for (auto k : {FamilyKind::normal, FamilyKind::gev, FamilyKind::gp, FamilyKind::frechet,
                 FamilyKind::point_mass}) {
    if (Family(k).name() == name) return Family(k);
  }
  return std::nullopt;
}

bool Family::valid(const Theta& t) const {
  switch (kind_) {
    case FamilyKind::normal:
      return std::isfinite(t[0]) && t[1] > 0.0 && std::isfinite(t[1]);
    case FamilyKind::gev:
      return std::isfinite(t[0]) && t[1] > 0.0 && std::isfinite(t[1]) && std::isfinite(t[2]);
    case FamilyKind::gp:
      return t[0] > 0.0 && std::isfinite(t[0]) && std::isfinite(t[1]);
    case FamilyKind::frechet:
      return t[0] > 0.0 && t[1] > 0.0 && std::isfinite(t[0]) && std::isfinite(t[1]);
    case FamilyKind::point_mass:
      return std::isfinite(t[0]);
  }
  return false;
}

bool Family::valid_for_estimation(const Theta& t) const {
  if (!valid(t)) return false;
  if (kind_ == FamilyKind::gev) return t[2] > -1.0;
  if (kind_ == FamilyKind::gp) return t[1] > -1.0;
  return true;
}

double Family::log_density(const Theta& t, double y) const {
  switch (kind_) {
    case FamilyKind::normal: return normal_logpdf(as_normal(t), y);
    case FamilyKind::gev: return gev_logpdf(as_gev(t), y);
    case FamilyKind::gp: return gp_logpdf(as_gp(t), y);
    case FamilyKind::frechet: return frechet_logpdf(as_frechet(t), y);
    case FamilyKind::point_mass:
      if (!valid(t)) throw DomainError("invalid point-mass location");
      require_finite_y(y);
      return y == t[0] ? 0.0 : kNegInf;
  }
  return kNegInf;
}

double Family::cdf(const Theta& t, double y) const {
  switch (kind_) {
    case FamilyKind::normal: return normal_cdf(as_normal(t), y);
    case FamilyKind::gev: return gev_cdf(as_gev(t), y);
    case FamilyKind::gp: return gp_cdf(as_gp(t), y);
    case FamilyKind::frechet: return frechet_cdf(as_frechet(t), y);
    case FamilyKind::point_mass:
      if (!valid(t)) throw DomainError("invalid point-mass location");
      return y < t[0] ? 0.0 : 1.0;
  }
  return 0.0;
}

double Family::quantile(const Theta& t, double p) const {
  switch (kind_) {
    case FamilyKind::normal: return normal_quantile(as_normal(t), p);
    case FamilyKind::gev: return gev_quantile(as_gev(t), p);
    case FamilyKind::gp: return gp_quantile(as_gp(t), p);
    case FamilyKind::frechet: return frechet_quantile(as_frechet(t), p);
    case FamilyKind::point_mass:
      if (!valid(t)) throw DomainError("invalid point-mass location");
      require_probability(p);
      return t[0];
  }
  return 0.0;
}

Theta Family::log_density_gradient(const Theta& t, double y) const {
  switch (kind_) {
    case FamilyKind::normal: {
      auto g = normal_logpdf_gradient(as_normal(t), y);
      return {g[0], g[1], 0.0};
    }
    case FamilyKind::gev: return gev_logpdf_gradient(as_gev(t), y);
    case FamilyKind::gp: {
      auto g = gp_logpdf_gradient(as_gp(t), y);
      return {g[0], g[1], 0.0};
    }
    case FamilyKind::frechet: {
      auto g = frechet_logpdf_gradient(as_frechet(t), y);
      return {g[0], g[1], 0.0};
    }
    case FamilyKind::point_mass:
      throw DomainError("point mass has no density gradient");
  }
  return {};
}

std::pair<double, double> Family::support(const Theta& t) const {
  if (!valid(t)) throw DomainError("invalid parameters for " + std::string(name()));
  switch (kind_) {
    case FamilyKind::normal: return {-kInf, kInf};
    case FamilyKind::gev: {
      const double mu = t[0], sigma = t[1], xi = t[2];
      if (xi_is_zero(xi)) return {-kInf, kInf};
      if (xi > 0.0) return {mu - sigma / xi, kInf};
      return {-kInf, mu - sigma / xi};
    }
    case FamilyKind::gp:
      if (t[1] < 0.0 && !xi_is_zero(t[1])) return {0.0, -t[0] / t[1]};
      return {0.0, kInf};
    case FamilyKind::frechet: return {0.0, kInf};
    case FamilyKind::point_mass: return {t[0], t[0]};
  }
  return {-kInf, kInf};
}

double Family::base_variate(double u) const {
  switch (kind_) {
    case FamilyKind::normal: return standard_normal_quantile(u);
    case FamilyKind::gev:
    case FamilyKind::frechet: return unit_exponential_lower(u);
    case FamilyKind::gp: return unit_exponential_upper(u);
    case FamilyKind::point_mass: return 0.0;
  }
  return 0.0;
}

double Family::from_base(const Theta& t, double b) const {
  switch (kind_) {
    case FamilyKind::normal: return t[0] + t[1] * b;
    case FamilyKind::gev: return gev_from_base(as_gev(t), b);
    case FamilyKind::gp: return gp_from_base(as_gp(t), b);
    case FamilyKind::frechet: return frechet_from_base(as_frechet(t), b);
    case FamilyKind::point_mass: return t[0];
  }
  return 0.0;
}

double Family::sample(const Theta& t, RandomStream& rng) const {
  if (!valid(t)) throw DomainError("invalid parameters for " + std::string(name()));
  return from_base(t, base_variate(rng.uniform()));
}

std::vector<double> Family::sample(const Theta& t, RandomStream& rng, std::size_t count) const {
  if (!valid(t)) throw DomainError("invalid parameters for " + std::string(name()));
  std::vector<double> out(count);
  for (auto& y : out) y = from_base(t, base_variate(rng.uniform()));
  return out;
}

}  // namespace mest

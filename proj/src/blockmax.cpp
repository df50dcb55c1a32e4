#include "mest/blockmax.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <exception>
#include <numbers>

#include "mest/error.hpp"
#include "mest/kernels.hpp"

namespace mest {

namespace {

// Root of a decreasing function g on [lo, inf), bracketed by doubling upward.
template <class F>
double solve_decreasing(F g, double lo) {
  double hi = lo + 1.0;
  while (g(hi) > 0.0) {
    lo = hi;
    hi = 2.0 * hi + 1.0;
    if (hi > 1e6) throw DomainError("baseline quantile inversion failed to bracket");
  }
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, tol, iters);
  return 0.5 * (a + b);
}

}  // namespace

TailBaseline::TailBaseline(BaselineKind kind, double alpha) : kind_(kind), alpha_(alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("tail index alpha must be > 0");
  if (kind_ == BaselineKind::perturbed_pareto) {
    // Lower endpoint: y^-alpha / log(e + y) = 1, solved in t = log y.
    auto g = [alpha](double t) { return -alpha * t - std::log(std::log(std::numbers::e + std::exp(t))); };
    const double lo = -50.0;
    double hi = 0.0;
    boost::math::tools::eps_tolerance<double> tol(50);
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, tol, iters);
    lower_ = std::exp(0.5 * (a + b));
  }
}

std::string TailBaseline::name() const {
  return kind_ == BaselineKind::pareto ? "pareto" : "perturbed-pareto";
}

double TailBaseline::tail(double y) const {
  if (y <= lower_) return 1.0;
  if (kind_ == BaselineKind::pareto) return std::pow(y, -alpha_);
  return std::min(1.0, std::pow(y, -alpha_) / std::log(std::numbers::e + y));
}

double TailBaseline::cdf(double y) const { return y <= lower_ ? 0.0 : 1.0 - tail(y); }

double TailBaseline::log_cdf(double y) const {
  if (y <= lower_) return kNegInf;
  return std::log1p(-tail(y));
}

double TailBaseline::upper_quantile(double q) const {
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("upper_quantile requires q in (0, 1]");
  if (q == 1.0) return lower_;
  if (kind_ == BaselineKind::pareto) return std::pow(q, -1.0 / alpha_);
  // -alpha t - log log(e + e^t) = log q, decreasing in t = log y.
  const double log_q = std::log(q);
  const double a = alpha_;
  auto g = [a, log_q](double t) {
    return -a * t - std::log(std::log(std::numbers::e + std::exp(t))) - log_q;
  };
  return std::exp(solve_decreasing(g, std::log(lower_)));
}

double TailBaseline::norming(double r) const {
  if (!(r >= 1.0)) throw DomainError("norming requires r >= 1");
  return upper_quantile(1.0 / r);
}

TailBaseline pareto_baseline(double alpha) { return TailBaseline(BaselineKind::pareto, alpha); }

TailBaseline perturbed_pareto_baseline(double alpha) {
  return TailBaseline(BaselineKind::perturbed_pareto, alpha);
}

ScaleLink loglinear_scale_link() {
  return [](std::span<const double> x, std::span<const double> beta) { return loglinear_scale(beta, x); };
}

ScaleLink covariate_free_scale_link() {
  return [](std::span<const double>, std::span<const double> beta) { return std::exp(beta[0]); };
}

double TailModel::c(std::span<const double> x) const {
  return std::pow(sigma(x, beta0), alpha0());
}

double hetero_cdf(const TailModel& model, std::span<const double> x, double y) {
  const double lf = model.baseline.log_cdf(y);
  if (lf == kNegInf) return 0.0;
  return std::exp(model.c(x) * lf);
}

BlockMaxRow sample_block_maxima(const TailModel& model, const CovariateDesign& design,
                                std::size_t n, std::size_t block_size, std::uint64_t seed,
                                bool materialize) {
  if (n == 0 || block_size == 0) throw DomainError("sample_block_maxima requires n, r >= 1");
  BlockMaxRow row;
  row.n = n;
  row.block_size = block_size;
  row.seed = seed;
  row.covariates = design.generate(n);
  row.maxima.resize(n);
  RandomStream rng(seed);
  const auto r = static_cast<double>(block_size);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = model.c(row.covariates.row(i));
    if (!(c > 0.0) || !std::isfinite(c))
      throw GenerationError("tail scaling c(x) is not positive at index " + std::to_string(i), i);
    if (materialize) {
      double m = kNegInf;
      for (std::size_t t = 0; t < block_size; ++t) {
        // F0^c(y) = u  <=>  1 - F0(y) = -expm1(log(u) / c)
        const double q = -std::expm1(std::log(rng.uniform()) / c);
        m = std::max(m, model.baseline.upper_quantile(q));
      }
      row.maxima[i] = m;
    } else {
      const double q = -std::expm1(std::log(rng.uniform()) / (c * r));
      row.maxima[i] = model.baseline.upper_quantile(q);
    }
  }
  return row;
}

std::size_t log_squared_block_size(std::size_t n) {
  const double l = std::log(static_cast<double>(std::max<std::size_t>(n, 1)));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(l * l)));
}

namespace {

double frechet_term(double scale, double alpha, double m) {
  if (m <= 0.0) return kNegInf;
  const double lr = std::log(m / scale);
  return std::log(alpha) - std::log(scale) - (alpha + 1.0) * lr - std::exp(-alpha * lr);
}

}  // namespace

double frechet_loglik(double tau, std::span<const double> beta, double alpha,
                      const BlockMaxRow& row, const ScaleLink& sigma) {
  if (!(tau > 0.0) || !(alpha > 0.0)) throw DomainError("frechet_loglik requires tau > 0 and alpha > 0");
  if (row.n == 0) throw DomainError("frechet_loglik: empty row");
  const auto r = kernels::sum_terms_parallel(row.n, [&](std::size_t i) {
    return frechet_term(tau * sigma(row.covariates.row(i), beta), alpha, row.maxima[i]);
  });
  return r.mean(row.n);
}

double median_scaling(const BlockMaxRow& row) {
  if (row.maxima.empty()) throw DomainError("median_scaling: empty row");
  std::vector<double> m = row.maxima;
  const auto mid = m.begin() + static_cast<std::ptrdiff_t>((m.size() - 1) / 2);
  std::nth_element(m.begin(), mid, m.end());
  return *mid;
}

FrechetFit fit_frechet(const BlockMaxRow& row, const ScaleLink& sigma, double scaling,
                       const FrechetFitConfig& cfg, std::optional<std::vector<double>> reference) {
  if (!(scaling > 0.0)) throw DomainError("fit_frechet: scaling must be > 0");
  const auto [a_lo, a_hi] = cfg.alpha_range;
  const auto [g_lo, g_hi] = cfg.gamma_range;
  if (!(a_lo > 0.0) || !(g_lo > 0.0)) throw DomainError("fit_frechet: alpha and gamma ranges must be positive");
  const std::size_t d = cfg.beta_lower.size();
  if (d == 0 || cfg.beta_upper.size() != d) throw DomainError("fit_frechet: beta box is malformed");

  std::vector<double> lower{a_lo}, upper{a_hi};
  lower.insert(lower.end(), cfg.beta_lower.begin(), cfg.beta_lower.end());
  upper.insert(upper.end(), cfg.beta_upper.begin(), cfg.beta_upper.end());
  lower.push_back(std::log(g_lo));
  upper.push_back(std::log(g_hi));

  // Coordinates with lower == upper are pinned; the optimizer sees the rest.
  std::vector<std::size_t> free;
  std::vector<double> free_lo, free_hi;
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (lower[k] > upper[k]) throw DomainError("fit_frechet: search ranges need lower <= upper");
    if (lower[k] < upper[k]) {
      free.push_back(k);
      free_lo.push_back(lower[k]);
      free_hi.push_back(upper[k]);
    }
  }
  if (free.empty()) throw DomainError("fit_frechet: every coordinate is pinned");
  const BoxDomain box(free_lo, free_hi);
  auto expand = [pinned = lower, free](std::span<const double> z) {
    if (z.size() != free.size()) return std::vector<double>(z.begin(), z.end());
    std::vector<double> full = pinned;
    for (std::size_t k = 0; k < free.size(); ++k) full[free[k]] = z[k];
    return full;
  };

  Criterion crit;
  crit.n = row.n;
  crit.term = [&row, &sigma, scaling, d, &expand](std::span<const double> z, std::size_t i) {
    const std::vector<double> eta = expand(z);
    const double tau = scaling * std::exp(eta[d + 1]);
    return frechet_term(tau * sigma(row.covariates.row(i), std::span<const double>(eta).subspan(1, d)), eta[0],
                        row.maxima[i]);
  };

  std::optional<std::vector<double>> ref;
  if (reference) {
    if (reference->size() != d + 2) throw DomainError("fit_frechet: reference must be (alpha, beta, gamma)");
    std::vector<double> r = *reference;
    r.back() = std::log(r.back());
    bool matches_pins = true;
    std::vector<double> z;
    for (std::size_t k = 0, f = 0; k < r.size(); ++k) {
      if (f < free.size() && free[f] == k) {
        z.push_back(r[k]);
        ++f;
      } else if (r[k] != lower[k]) {
        matches_pins = false;
      }
    }
    if (matches_pins) ref = std::move(z);
  }

  FrechetFit out;
  out.fit = maximize(crit, box, cfg.optimizer, std::move(ref));
  out.fit.eta_hat = expand(out.fit.eta_hat);
  for (auto& point : out.fit.trace) point.eta = expand(point.eta);
  const auto& eta = out.fit.eta_hat;
  out.alpha_hat = eta[0];
  out.beta_hat.assign(eta.begin() + 1, eta.begin() + 1 + static_cast<std::ptrdiff_t>(d));
  out.gamma_hat = std::exp(eta[d + 1]);
  out.tau_hat = out.gamma_hat * scaling;
  out.scaling_used = scaling;
  out.gamma_lower = g_lo;
  out.gamma_upper = g_hi;
  return out;
}

bool MinMaximaReport::any_violation() const {
  return std::any_of(entries.begin(), entries.end(), [](const auto& e) { return e.bound_violated; });
}

bool MinMaximaReport::diverging() const {
  if (entries.empty()) return false;
  for (std::size_t k = 1; k < entries.size(); ++k) {
    if (entries[k].median_min < entries[k - 1].median_min) return false;
  }
  return entries.back().median_min > y;
}

MinMaximaReport check_min_maxima_divergence(const TailModel& model, const CovariateDesign& design,
                                            const std::vector<std::pair<std::size_t, std::size_t>>& schedule,
                                            std::size_t reps, double y, std::uint64_t seed) {
  if (reps == 0) throw DomainError("check_min_maxima_divergence requires reps >= 1");
  MinMaximaReport report;
  report.y = y;
  for (const auto& [n, r] : schedule) {
    MinMaximaEntry e;
    e.n = n;
    e.block_size = r;
    e.min_maxima.resize(reps);
    const auto count = static_cast<long long>(reps);
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (long long rep = 0; rep < count; ++rep) {
      try {
        const auto row = sample_block_maxima(model, design, n, r,
                                             derive_seed(seed, {n, static_cast<std::uint64_t>(rep)}));
        e.min_maxima[static_cast<std::size_t>(rep)] = *std::min_element(row.maxima.begin(), row.maxima.end());
      } catch (...) {
#pragma omp critical(mest_minmax_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);

    std::vector<double> sorted = e.min_maxima;
    std::sort(sorted.begin(), sorted.end());
    e.median_min = sorted[(sorted.size() - 1) / 2];
    const auto hits = std::count_if(sorted.begin(), sorted.end(), [y](double m) { return m <= y; });
    e.exceedance_frequency = static_cast<double>(hits) / static_cast<double>(reps);
    e.standard_error = std::sqrt(e.exceedance_frequency * (1.0 - e.exceedance_frequency) /
                                 static_cast<double>(reps));
    const auto xs = design.generate(n);
    for (std::size_t i = 0; i < n; ++i) e.sup_cdf = std::max(e.sup_cdf, hetero_cdf(model, xs.row(i), y));
    e.analytic_bound = static_cast<double>(n) * std::pow(e.sup_cdf, static_cast<double>(r));
    e.bound_violated = e.exceedance_frequency > e.analytic_bound + 3.0 * e.standard_error;
    report.entries.push_back(std::move(e));
  }
  return report;
}

bool DoaReport::strictly_decreasing() const {
  for (std::size_t k = 1; k < entries.size(); ++k) {
    if (!(entries[k].sup_error < entries[k - 1].sup_error)) return false;
  }
  return !entries.empty();
}

DoaReport check_doa_uniform(const TailModel& model, const std::vector<std::vector<double>>& x_grid,
                            const std::vector<double>& y_grid,
                            const std::vector<std::size_t>& block_sizes) {
  DoaReport report;
  report.y_grid = y_grid;
  const double alpha = model.alpha0();
  for (std::size_t r : block_sizes) {
    DoaEntry e;
    e.block_size = r;
    const double rr = static_cast<double>(r);
    const double a_r = model.baseline.norming(rr);
    e.sup_error_per_y.assign(y_grid.size(), 0.0);
    for (std::size_t j = 0; j < y_grid.size(); ++j) {
      const double y = y_grid[j];
      const double lf = model.baseline.log_cdf(a_r * y);
      for (const auto& x : x_grid) {
        const double c = model.c(x);
        const double block_cdf = lf == kNegInf ? 0.0 : std::exp(c * rr * lf);
        // Phi_alpha(y / c^(1/alpha)) = exp(-c y^-alpha)
        const double limit = y > 0.0 ? std::exp(-c * std::pow(y, -alpha)) : 0.0;
        e.sup_error_per_y[j] = std::max(e.sup_error_per_y[j], std::abs(block_cdf - limit));
      }
      e.sup_error = std::max(e.sup_error, e.sup_error_per_y[j]);
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace mest

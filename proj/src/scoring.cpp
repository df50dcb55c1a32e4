#include "mest/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "mest/error.hpp"
#include "mest/kernels.hpp"

namespace mest {

namespace {

double abs_pow(double d, double beta) {
  const double a = std::abs(d);
  return beta == 1.0 ? a : std::pow(a, beta);
}

}  // namespace

void EnergyConfig::validate() const {
  if (!(beta > 0.0 && beta < 2.0))
    throw DomainError("energy score requires 0 < beta < 2, got " + std::to_string(beta));
  if (mc_pairs == 0) throw DomainError("energy score requires mc_pairs >= 1");
}

std::optional<ScoringRule> ScoringRule::from_name(std::string_view name, EnergyConfig cfg) {
  if (name == "log" || name == "mle") return log_score();
  if (name == "energy") return energy_score(cfg);
  if (name == "crps") {
    cfg.beta = 1.0;
    return energy_score(cfg);
  }
  return std::nullopt;
}

std::string ScoringRule::name() const {
  return kind == ScoringRuleKind::log ? "log" : "energy";
}

SampleableDistribution SampleableDistribution::from_family(Family family, const Theta& theta) {
  if (!family.valid(theta)) throw DomainError("invalid parameters for " + std::string(family.name()));
  SampleableDistribution d;
  d.dim = 1;
  d.uniforms_per_draw = 1;
  d.transform = [family, theta](std::span<const double> u, std::span<double> out) {
    out[0] = family.from_base(theta, family.base_variate(u[0]));
  };
  return d;
}

SampleableDistribution SampleableDistribution::point_mass(std::vector<double> a) {
  SampleableDistribution d;
  d.dim = a.size();
  d.uniforms_per_draw = 1;
  d.transform = [a](std::span<const double>, std::span<double> out) {
    std::copy(a.begin(), a.end(), out.begin());
  };
  return d;
}

double log_score(Family family, const Theta& theta, double y) {
  return family.log_density(theta, y);
}

double energy_score(const SampleableDistribution& dist, std::span<const double> y,
                    const EnergyConfig& cfg, RandomStream& rng) {
  cfg.validate();
  if (y.size() != dist.dim) throw DomainError("energy_score: observation dimension mismatch");
  const std::size_t k = dist.uniforms_per_draw;
  std::vector<double> u(k), u2(k), y1(dist.dim), y2(dist.dim);
  kernels::CompensatedSum within, to_obs;
  for (std::size_t j = 0; j < cfg.mc_pairs; ++j) {
    if (cfg.antithetic && (j % 2 == 1)) {
      for (std::size_t c = 0; c < k; ++c) {
        u[c] = 1.0 - u[c];
        u2[c] = 1.0 - u2[c];
      }
    } else {
      for (std::size_t c = 0; c < k; ++c) u[c] = rng.uniform();
      for (std::size_t c = 0; c < k; ++c) u2[c] = rng.uniform();
    }
    dist.transform(u, y1);
    dist.transform(u2, y2);
    within.add(kernels::distance_pow(y1, y2, cfg.beta));
    to_obs.add(kernels::distance_pow(y1, y, cfg.beta));
    to_obs.add(kernels::distance_pow(y2, y, cfg.beta));
  }
  const auto m = static_cast<double>(cfg.mc_pairs);
  return 0.5 * within.value() / m - to_obs.value() / (2.0 * m);
}

double energy_score_empirical(std::span<const double> samples, std::size_t dim,
                              std::span<const double> y, double beta) {
  if (dim == 0 || samples.empty() || samples.size() % dim != 0)
    throw DomainError("energy_score_empirical: empty or ragged sample");
  if (y.size() != dim) throw DomainError("energy_score_empirical: observation dimension mismatch");
  if (!(beta > 0.0 && beta < 2.0)) throw DomainError("energy score requires 0 < beta < 2");
  return 0.5 * kernels::pairwise_mean_distance_parallel(samples, dim, beta) -
         kernels::mean_distance_to(samples, dim, y, beta);
}

double energy_score_empirical(const std::vector<double>& samples, double y, double beta) {
  const double obs[1] = {y};
  return energy_score_empirical(std::span<const double>(samples), 1, obs, beta);
}

std::vector<double> energy_base_variates(Family family, std::size_t pairs, bool antithetic,
                                         RandomStream& rng) {
  std::vector<double> bases(2 * pairs);
  double u1 = 0.5, u2 = 0.5;
  for (std::size_t j = 0; j < pairs; ++j) {
    if (antithetic && (j % 2 == 1)) {
      u1 = 1.0 - u1;
      u2 = 1.0 - u2;
    } else {
      u1 = rng.uniform();
      u2 = rng.uniform();
    }
    bases[2 * j] = family.base_variate(u1);
    bases[2 * j + 1] = family.base_variate(u2);
  }
  return bases;
}

double energy_score_from_bases(Family family, const Theta& theta, double y,
                               std::span<const double> bases, double beta) {
  const std::size_t pairs = bases.size() / 2;
  double within = 0.0, to_obs = 0.0;
  for (std::size_t j = 0; j < pairs; ++j) {
    const double a = family.from_base(theta, bases[2 * j]);
    const double b = family.from_base(theta, bases[2 * j + 1]);
    within += abs_pow(a - b, beta);
    to_obs += abs_pow(a - y, beta) + abs_pow(b - y, beta);
  }
  const auto m = static_cast<double>(pairs);
  return 0.5 * within / m - to_obs / (2.0 * m);
}

GapEstimate propriety_gap(const ScoringRule& rule, Family family_p, const Theta& p,
                          Family family_q, const Theta& q, std::size_t mc_size,
                          RandomStream& rng) {
  if (!family_p.valid(p) || !family_q.valid(q))
    throw DomainError("propriety_gap: invalid parameters");
  if (mc_size < 2) throw DomainError("propriety_gap: mc_size must be at least 2");
  const bool same = family_p == family_q && p == q;

  kernels::CompensatedSum sum, sum_sq;
  bool infinite = false;
  for (std::size_t j = 0; j < mc_size; ++j) {
    const double u1 = rng.uniform();
    double term = 0.0;
    if (rule.kind == ScoringRuleKind::log) {
      if (!same) {
        const double y = family_p.from_base(p, family_p.base_variate(u1));
        const double lq = family_q.log_density(q, y);
        if (lq == kNegInf) {
          infinite = true;
          continue;
        }
        term = family_p.log_density(p, y) - lq;
      }
    } else {
      // Y_k ~ P and X_k ~ P' on shared uniforms U_1, U_2. Every expectation in
      // ES(P, Y) - ES(P', Y) gets an unbiased estimate, and X == Y when P == P'.
      const double u2 = rng.uniform();
      if (!same) {
        const double beta = rule.energy.beta;
        const double y1 = family_p.from_base(p, family_p.base_variate(u1));
        const double y2 = family_p.from_base(p, family_p.base_variate(u2));
        const double x1 = family_q.from_base(q, family_q.base_variate(u1));
        const double x2 = family_q.from_base(q, family_q.base_variate(u2));
        term = 0.5 * abs_pow(x1 - y2, beta) + 0.5 * abs_pow(x2 - y1, beta) -
               0.5 * abs_pow(y1 - y2, beta) - 0.5 * abs_pow(x1 - x2, beta);
      }
    }
    sum.add(term);
    sum_sq.add(term * term);
  }
  GapEstimate est;
  est.mc_size = mc_size;
  if (infinite) {
    est.gap = std::numeric_limits<double>::infinity();
    return est;
  }
  const auto n = static_cast<double>(mc_size);
  est.gap = sum.value() / n;
  const double var = std::max(0.0, (sum_sq.value() - n * est.gap * est.gap) / (n - 1.0));
  est.standard_error = std::sqrt(var / n);
  return est;
}

bool ProprietySweep::pass() const {
  return !checks.empty() &&
         std::all_of(checks.begin(), checks.end(), [](const ProprietyCheck& c) { return c.pass; });
}

ProprietySweep propriety_sweep(const ScoringRule& rule, Family family, std::span<const double> lower,
                               std::span<const double> upper, std::size_t pairs, std::size_t mc_size,
                               std::uint64_t seed, double min_distance) {
  const std::size_t k = family.parameter_count();
  if (lower.size() != k || upper.size() != k)
    throw DomainError("propriety_sweep: box must cover the " + std::to_string(k) + " parameters of " +
                      std::string(family.name()));
  if (pairs == 0) throw DomainError("propriety_sweep: pairs must be >= 1");
  if (rule.kind == ScoringRuleKind::energy) rule.energy.validate();

  ProprietySweep sweep;
  sweep.rule = rule.name();
  sweep.min_distance = min_distance;
  sweep.checks.resize(pairs);
  const auto count = static_cast<long long>(pairs);
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long long j = 0; j < count; ++j) {
    try {
      RandomStream rng(seed, {static_cast<std::uint64_t>(j)});
      ProprietyCheck c;
      for (std::size_t d = 0; d < k; ++d) {
        c.p[d] = lower[d] + (upper[d] - lower[d]) * rng.uniform();
        c.q[d] = lower[d] + (upper[d] - lower[d]) * rng.uniform();
        c.distance += (c.p[d] - c.q[d]) * (c.p[d] - c.q[d]);
      }
      c.distance = std::sqrt(c.distance);
      c.gap = propriety_gap(rule, family, c.p, family, c.q, mc_size, rng);
      const double se3 = 3.0 * c.gap.standard_error;
      c.pass = c.gap.gap >= -se3 && (c.distance <= min_distance || c.gap.gap > se3);
      sweep.checks[static_cast<std::size_t>(j)] = c;
    } catch (...) {
#pragma omp critical(mest_propriety_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return sweep;
}

}  // namespace mest

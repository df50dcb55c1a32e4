#pragma once

// Strictly proper scoring rules, oriented so that higher is better:
//   log score     S(P, y) = log p(y)
//   energy score  ES_beta(P, y) = 1/2 E||Y - Y'||^beta - E||Y - y||^beta,  0 < beta < 2
// CRPS is the energy score with d = 1 and beta = 1.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mest/distributions.hpp"
#include "mest/random.hpp"

namespace mest {

struct EnergyConfig {
  double beta = 1.0;
  std::size_t mc_pairs = 100000;
  /// Pairs 2k and 2k+1 use antithetic uniforms (u and 1 - u).
  bool antithetic = true;

  void validate() const;
};

enum class ScoringRuleKind { log, energy };

struct ScoringRule {
  ScoringRuleKind kind = ScoringRuleKind::log;
  EnergyConfig energy{};

  static ScoringRule log_score() { return {}; }
  static ScoringRule energy_score(EnergyConfig cfg) { return {ScoringRuleKind::energy, cfg}; }
  /// Accepts "log", "mle" (alias of log), "energy" and "crps" (energy with beta = 1).
  static std::optional<ScoringRule> from_name(std::string_view name, EnergyConfig cfg = {});
  [[nodiscard]] std::string name() const;
};

/// A distribution on R^dim sampled by transforming a fixed number of uniforms.
struct SampleableDistribution {
  std::size_t dim = 1;
  std::size_t uniforms_per_draw = 1;
  std::function<void(std::span<const double> u, std::span<double> out)> transform;

  /// Inverse-cdf sampler of a one-dimensional family member.
  static SampleableDistribution from_family(Family family, const Theta& theta);
  /// Point mass at a.
  static SampleableDistribution point_mass(std::vector<double> a);
};

[[nodiscard]] double log_score(Family family, const Theta& theta, double y);

/// Monte Carlo energy score from cfg.mc_pairs independent pairs (Y, Y').
/// E||Y - y||^beta is averaged over both members of every pair.
[[nodiscard]] double energy_score(const SampleableDistribution& dist, std::span<const double> y,
                                  const EnergyConfig& cfg, RandomStream& rng);

/// Plug-in energy score of the empirical distribution of the samples (m rows
/// of dimension dim): 1/(2 m^2) sum_{j,k} ||s_j - s_k||^beta - 1/m sum_j ||s_j - y||^beta.
[[nodiscard]] double energy_score_empirical(std::span<const double> samples, std::size_t dim,
                                            std::span<const double> y, double beta);
[[nodiscard]] double energy_score_empirical(const std::vector<double>& samples, double y,
                                            double beta);

/// Base variates for common-random-number energy scores of a 1-d family:
/// 2 * pairs values laid out as (b_0, b'_0, b_1, b'_1, ...).
[[nodiscard]] std::vector<double> energy_base_variates(Family family, std::size_t pairs,
                                                       bool antithetic, RandomStream& rng);

/// Energy score of family(theta) at y using fixed base variates. Reusing the
/// same bases across theta makes the score a smooth function of theta.
[[nodiscard]] double energy_score_from_bases(Family family, const Theta& theta, double y,
                                             std::span<const double> bases, double beta);

struct GapEstimate {
  double gap = 0.0;
  double standard_error = 0.0;
  std::size_t mc_size = 0;
};

/// Monte Carlo estimate of S(P, P) - S(P', P) = int [S(P, y) - S(P', y)] P(dy).
/// Both scores are evaluated on the same uniforms, so P == P' gives exactly 0.
[[nodiscard]] GapEstimate propriety_gap(const ScoringRule& rule, Family family_p,
                                        const Theta& p, Family family_q, const Theta& q,
                                        std::size_t mc_size, RandomStream& rng);

struct ProprietyCheck {
  Theta p{};
  Theta q{};
  double distance = 0.0;  // Euclidean distance between the parameter vectors
  GapEstimate gap;
  bool pass = false;  // gap >= -3 se, and gap > 3 se when distance > min_distance
};

struct ProprietySweep {
  std::string rule;
  double min_distance = 0.1;
  std::vector<ProprietyCheck> checks;

  [[nodiscard]] bool pass() const;
};

/// Draws `pairs` parameter pairs uniformly from the box over the family's
/// natural parameters and estimates each propriety gap from mc_size draws.
[[nodiscard]] ProprietySweep propriety_sweep(const ScoringRule& rule, Family family,
                                             std::span<const double> lower,
                                             std::span<const double> upper, std::size_t pairs,
                                             std::size_t mc_size, std::uint64_t seed,
                                             double min_distance = 0.1);

}  // namespace mest

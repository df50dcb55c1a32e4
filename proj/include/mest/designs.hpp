#pragma once

// Fixed (non-random) covariate designs, link functions and triangular-array
// data generation. Row n of the array is generated from its own seed; within
// a row responses are independent draws from the family at theta(x_{n,i}, eta0).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mest/distributions.hpp"
#include "mest/random.hpp"

namespace mest {

/// n covariate vectors of dimension dim, row-major.
struct CovariateMatrix {
  std::size_t n = 0;
  std::size_t dim = 1;
  std::vector<double> values;

  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
};

/// Deterministic rule producing x_{n,1..n} for every n, together with a
/// sampler for the limit law P_X of the empirical design measure.
struct CovariateDesign {
  std::string id;
  std::size_t dim = 1;
  std::string limit_law;
  std::function<CovariateMatrix(std::size_t n)> generate;
  std::function<void(RandomStream&, std::span<double>)> sample_limit;
};

/// (1/n, 2/n, ..., 1).
[[nodiscard]] std::vector<double> uniform_design(std::size_t n);

/// x_{n,i} = i/n; P_X = Uniform(0, 1].
[[nodiscard]] CovariateDesign uniform_grid_design();

/// First n points of a Sobol sequence scaled to the box; P_X = uniform on the box.
[[nodiscard]] CovariateDesign sobol_box_design(std::vector<double> lower, std::vector<double> upper);

/// Design built from m fixed rows: x_{n,i} = rows[floor((i - 1) m / n)], so the
/// empirical measure converges to the uniform distribution over the rows.
[[nodiscard]] CovariateDesign file_design(CovariateMatrix rows, std::string id);

/// Delimited text (comma, semicolon, tab or spaces), one covariate vector per
/// line, optional header line. Rejects NaN/Inf and ragged rows.
[[nodiscard]] CovariateMatrix parse_covariates(std::istream& in);
[[nodiscard]] CovariateMatrix read_covariate_file(const std::filesystem::path& path);

/// exp(beta^T x).
[[nodiscard]] double loglinear_scale(std::span<const double> beta, std::span<const double> x);

/// Continuous map (x, eta) -> theta for one family.
struct LinkSpec {
  std::string id;
  Family family{FamilyKind::normal};
  std::size_t parameter_dim = 1;
  std::size_t covariate_dim = 1;
  std::function<Theta(std::span<const double> x, std::span<const double> eta)> map;
  bool continuous = true;

  Theta operator()(std::span<const double> x, std::span<const double> eta) const {
    return map(x, eta);
  }
};

/// Normal, mean = eta^T x, fixed sd.
[[nodiscard]] LinkSpec normal_mean_link(std::size_t dim, double sd = 1.0);
/// Normal, mean = eta[0] regardless of x, fixed sd.
[[nodiscard]] LinkSpec normal_location_link(double sd = 1.0);
/// Normal, mean = eta[0] + eta[1] regardless of x. Not identifiable.
[[nodiscard]] LinkSpec normal_redundant_link(double sd = 1.0);
/// Normal, mean = eta[0] + eta[1] x, sd = exp(eta[2]).
[[nodiscard]] LinkSpec normal_location_scale_link();
/// GEV, mu = eta[0] + eta[1] x, sigma = exp(eta[2] + eta[3] x), xi = eta[4].
[[nodiscard]] LinkSpec gev_regression_link();
/// GEV, (mu, sigma, xi) = (eta[0], exp(eta[1]), eta[2]) regardless of x.
[[nodiscard]] LinkSpec gev_constant_link();
/// GP, a = exp(eta[0] + eta[1] x), xi = eta[2].
[[nodiscard]] LinkSpec gp_regression_link();
/// Point mass at eta[0].
[[nodiscard]] LinkSpec point_mass_link();

/// Looks up a built-in link by id.
[[nodiscard]] std::optional<LinkSpec> link_from_name(std::string_view id);
[[nodiscard]] std::vector<std::string> builtin_link_names();
[[nodiscard]] std::optional<CovariateDesign> design_from_name(std::string_view id);

struct DesignRow {
  std::size_t n = 0;
  CovariateMatrix covariates;
  std::vector<double> responses;
  std::uint64_t seed = 0;
  std::string kernel;
  std::size_t block_size = 1;
};

/// Draws Y_{n,i} ~ family(link(x_{n,i}, eta0)) independently for i = 1..n.
/// Throws GenerationError naming the first index whose link output is invalid.
[[nodiscard]] DesignRow generate_row(const CovariateDesign& design, const LinkSpec& link,
                                     std::span<const double> eta0, std::size_t n,
                                     std::uint64_t seed);

struct IdentifiabilityEntry {
  std::vector<double> eta;
  double mass = 0.0;  // estimated P_X(theta(x, eta) != theta(x, eta0))
  bool is_reference = false;
  bool violation = false;
};

struct IdentifiabilityReport {
  std::vector<IdentifiabilityEntry> entries;
  std::size_t mc_size = 0;

  [[nodiscard]] bool violated() const;
  [[nodiscard]] std::size_t violation_count() const;
};

/// Monte Carlo estimate, over P_X, of the mass where theta(x, eta) differs
/// from theta(x, eta0) by more than 1e-12 in some component. Grid points equal
/// to eta0 are marked as the reference and never flagged.
[[nodiscard]] IdentifiabilityReport check_identifiability(
    const LinkSpec& link, const CovariateDesign& design, std::span<const double> eta0,
    const std::vector<std::vector<double>>& grid, std::size_t mc_size, std::uint64_t seed);

}  // namespace mest

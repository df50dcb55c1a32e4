#pragma once

// Monte Carlo consistency experiments and tail diagnostics.
//
// Every (n, replication) cell draws its randomness from seeds derived from
// (master seed, n, rep), so results do not depend on execution order or on
// the number of threads.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mest/blockmax.hpp"
#include "mest/designs.hpp"
#include "mest/estimator.hpp"
#include "mest/scoring.hpp"

namespace mest {

inline constexpr int kSummarySchemaVersion = 1;

enum class ModelKind { regression, blockmax };

struct BlockmaxSettings {
  BaselineKind baseline = BaselineKind::pareto;
  std::string sigma_link = "loglinear";  // or "covariate-free"
  /// "log-squared" for ceil((log n)^2), or a fixed block size.
  std::string block_rule = "log-squared";
  std::size_t fixed_block_size = 0;
  /// "true" divides tau by a_r; "median" by the sample median of the maxima.
  std::string scaling = "true";
};

struct ExperimentConfig {
  std::string id;
  ModelKind model = ModelKind::regression;
  // regression models
  std::string link = "normal-location";
  std::string design = "uniform";
  std::string rule = "log";
  EnergyConfig energy{1.0, 64, true};
  /// For blockmax: (alpha0, beta0...); the true gamma is 1.
  std::vector<double> eta0;
  /// For blockmax the box is over (alpha, beta..., gamma).
  std::vector<double> box_lower;
  std::vector<double> box_upper;
  BlockmaxSettings blockmax{};

  std::vector<std::size_t> n_schedule;
  std::size_t replications = 20;
  std::uint64_t master_seed = 0;
  MaximizeConfig optimizer{};

  // Acceptance thresholds checked by the CLI; unset means "not checked".
  std::optional<double> max_final_median_error;
  std::vector<double> max_final_component_medians;
  bool require_monotone = false;

  void validate() const;
  [[nodiscard]] std::size_t block_size(std::size_t n) const;
};

[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& cfg);
/// Strict parse: unknown keys and missing required fields throw ParseError
/// naming the field. seed_override replaces master_seed; one of them is required.
[[nodiscard]] ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                                    std::optional<std::uint64_t> seed_override = std::nullopt);
/// SHA-256 of the canonical JSON dump of the config.
[[nodiscard]] std::string config_hash(const ExperimentConfig& cfg);

struct ConsistencyRecord {
  std::size_t n = 0;
  std::size_t rep = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t score_seed = 0;
  FitStatus status = FitStatus::degenerate;
  double error = 0.0;                   // d_H(eta_hat, eta0)
  std::vector<double> component_errors; // blockmax: |alpha|, ||beta||, |log gamma|
  double gap = 0.0;                     // M_n(eta_hat) - M_n(eta0)
  bool gap_excluded = false;            // M_n(eta0) = -inf or eta0 outside the box
  double criterion_value = 0.0;
  double reference_value = 0.0;
  std::size_t evaluations = 0;
  std::vector<double> eta_hat;

  friend bool operator==(const ConsistencyRecord&, const ConsistencyRecord&) = default;
};

struct SampleSizeSummary {
  std::size_t n = 0;
  double median_error = 0.0;
  double p90_error = 0.0;
  double bootstrap_se = 0.0;
  std::vector<double> component_medians;
  std::size_t degenerate = 0;
  double min_gap = 0.0;
};

struct ConsistencyReport {
  ExperimentConfig config;
  std::vector<ConsistencyRecord> records;
  std::vector<SampleSizeSummary> summaries;
  bool monotone = false;           // medians nonincreasing in n
  bool monotone_tolerant = false;  // at most one inversion within 1.5 bootstrap se
  bool gaps_nonnegative = false;
  std::size_t gap_records = 0;

  /// Component-wise medians nonincreasing in n (blockmax).
  [[nodiscard]] bool components_monotone() const;
  /// All thresholds configured in the experiment hold.
  [[nodiscard]] bool thresholds_pass() const;
};

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs every (n, rep) cell. If cell_dir is set, a cell whose file
/// {cell_dir}/{n}/{rep}.csv exists is loaded instead of recomputed, and newly
/// computed cells are written there atomically.
[[nodiscard]] ConsistencyReport run_consistency(
    const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& cell_dir = std::nullopt);

/// Summaries and verdicts from raw records only.
void summarize(ConsistencyReport& report);

struct PopulationEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo estimate of M(eta) = E[m_eta(X, Y)] with X ~ P_X and
/// Y ~ family(theta(X, eta0)). The draws depend only on seed, so estimates at
/// different eta share random numbers.
[[nodiscard]] PopulationEstimate population_criterion(const LinkSpec& link,
                                                      const CovariateDesign& design,
                                                      const ScoringRule& rule,
                                                      std::span<const double> eta,
                                                      std::span<const double> eta0,
                                                      std::size_t mc_size, std::uint64_t seed);

/// M(eta0) - M(eta) from the same draws, with the standard error of the paired
/// differences; +inf when M(eta) = -inf.
[[nodiscard]] PopulationEstimate population_gap(const LinkSpec& link, const CovariateDesign& design,
                                                const ScoringRule& rule, std::span<const double> eta,
                                                std::span<const double> eta0, std::size_t mc_size,
                                                std::uint64_t seed);

struct TailEnvelopeReport {
  std::vector<double> t_grid;
  std::vector<double> envelope;  // pointwise sup of the survival functions
  double second_moment = 0.0;    // 2 int t S(t) dt over the grid
  double tail_slope = 0.0;       // slope of log S vs log t in the upper tail; NaN if too few points
  bool heavy_tail = false;       // slope shallower than -2
};

/// Envelope of the empirical survival functions of |m| from one sample per
/// (n, i) cell.
[[nodiscard]] TailEnvelopeReport tail_envelope_from_samples(
    const std::vector<std::vector<double>>& abs_values, const std::vector<double>& t_grid);

/// Samples |m_eta(x_{n,i}, Y)| with Y ~ family(theta(x_{n,i}, eta0)); cells
/// are (n, i) with 0-based i < n.
[[nodiscard]] TailEnvelopeReport tail_envelope_diagnostic(
    const LinkSpec& link, const CovariateDesign& design, const ScoringRule& rule,
    std::span<const double> eta, std::span<const double> eta0,
    const std::vector<std::pair<std::size_t, std::size_t>>& cells, const std::vector<double>& t_grid,
    std::size_t mc_size, std::uint64_t seed);

/// Same for the Frechet log score on block maxima at (alpha0, beta0, a_r).
[[nodiscard]] TailEnvelopeReport tail_envelope_blockmax(
    const TailModel& model, const CovariateDesign& design,
    const std::vector<std::pair<std::size_t, std::size_t>>& cells, const std::vector<double>& t_grid,
    std::size_t mc_size, std::uint64_t seed);

[[nodiscard]] std::vector<double> default_t_grid();

// ---------------------------------------------------------------- reports

/// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite values.
[[nodiscard]] std::string format_double(double v);

/// RFC 4180: quote fields containing comma, quote, CR or LF.
[[nodiscard]] std::string csv_escape(const std::string& field);
[[nodiscard]] std::vector<std::vector<std::string>> parse_csv(const std::string& text);

[[nodiscard]] std::string records_to_csv(const std::string& experiment_id,
                                         const std::vector<ConsistencyRecord>& records);
[[nodiscard]] std::vector<ConsistencyRecord> records_from_csv(const std::string& text);

[[nodiscard]] nlohmann::json summary_json(const ConsistencyReport& report);

/// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

struct EmittedFiles {
  std::filesystem::path raw_csv;
  std::filesystem::path summary_csv;
  std::filesystem::path summary_json;
};

/// {root}/{id}/raw.csv, summary.csv and summary.json.
EmittedFiles emit_report(const ConsistencyReport& report, const std::filesystem::path& root);

}  // namespace mest

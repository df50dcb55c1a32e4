#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mest/error.hpp"
#include "mest/harness.hpp"
#include "mest/kernels.hpp"

namespace mest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

double lower_median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double quantile_of(std::vector<double> v, double p) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) ;
  return v[std::min(v.size() - 1, k == 0 ? 0 : k - 1)];
}

ConsistencyRecord run_regression_cell(const ExperimentConfig& cfg, const LinkSpec& link,
                                      const CovariateDesign& design, const ScoringRule& rule,
                                      const BoxDomain& box, std::size_t n, std::size_t rep) {
  ConsistencyRecord rec;
  rec.n = n;
  rec.rep = rep;
  rec.data_seed = derive_seed(cfg.master_seed, {n, rep, 0});
  rec.score_seed = derive_seed(cfg.master_seed, {n, rep, 1});

  const DesignRow data = generate_row(design, link, cfg.eta0, n, rec.data_seed);
  Criterion crit = score_criterion(rule, link, data, rec.score_seed);
  crit.parallel = false;  // cells already run in parallel
  MaximizeConfig opt = cfg.optimizer;
  opt.parallel = false;

  const bool inside = box.contains(cfg.eta0);
  std::optional<std::vector<double>> ref;
  if (inside) ref = cfg.eta0;
  const FitResult fit = maximize(crit, box, opt, ref);

  rec.status = fit.status;
  rec.eta_hat = fit.eta_hat;
  rec.criterion_value = fit.criterion_value;
  rec.evaluations = fit.evaluations;
  rec.error = fit.eta_hat.empty() ? kNaN : euclidean(fit.eta_hat, cfg.eta0);
  rec.reference_value = fit.reference_value.value_or(kNaN);
  rec.gap_excluded = !inside || !fit.reference_value || !std::isfinite(*fit.reference_value) ||
                     fit.status != FitStatus::success;
  rec.gap = rec.gap_excluded ? kNaN : fit.criterion_value - *fit.reference_value;
  return rec;
}

TailModel make_tail_model(const ExperimentConfig& cfg) {
  const double alpha0 = cfg.eta0.front();
  const TailBaseline baseline(cfg.blockmax.baseline, alpha0);
  const ScaleLink sigma =
      cfg.blockmax.sigma_link == "loglinear" ? loglinear_scale_link() : covariate_free_scale_link();
  return TailModel{baseline, sigma, std::vector<double>(cfg.eta0.begin() + 1, cfg.eta0.end())};
}

ConsistencyRecord run_blockmax_cell(const ExperimentConfig& cfg, const TailModel& model,
                                    const CovariateDesign& design, std::size_t n, std::size_t rep) {
  ConsistencyRecord rec;
  rec.n = n;
  rec.rep = rep;
  rec.data_seed = derive_seed(cfg.master_seed, {n, rep, 0});
  rec.score_seed = 0;

  const std::size_t r = cfg.block_size(n);
  const BlockMaxRow row = sample_block_maxima(model, design, n, r, rec.data_seed);
  const double a_r = model.baseline.norming(static_cast<double>(r));
  const double scaling = cfg.blockmax.scaling == "true" ? a_r : median_scaling(row);

  const std::size_t d = model.beta0.size();
  FrechetFitConfig fc;
  fc.alpha_range = {cfg.box_lower.front(), cfg.box_upper.front()};
  fc.beta_lower.assign(cfg.box_lower.begin() + 1, cfg.box_lower.begin() + 1 + static_cast<std::ptrdiff_t>(d));
  fc.beta_upper.assign(cfg.box_upper.begin() + 1, cfg.box_upper.begin() + 1 + static_cast<std::ptrdiff_t>(d));
  fc.gamma_range = {cfg.box_lower.back(), cfg.box_upper.back()};
  fc.optimizer = cfg.optimizer;
  fc.optimizer.parallel = false;

  // The true parameter in (alpha, beta, gamma) coordinates has gamma = a_r / scaling.
  std::vector<double> truth = cfg.eta0;
  truth.push_back(a_r / scaling);
  const bool inside = truth.back() >= fc.gamma_range.first && truth.back() <= fc.gamma_range.second &&
                      truth.front() >= fc.alpha_range.first && truth.front() <= fc.alpha_range.second &&
                      std::equal(truth.begin() + 1, truth.end() - 1, fc.beta_lower.begin(),
                                 [](double v, double lo) { return v >= lo; }) &&
                      std::equal(truth.begin() + 1, truth.end() - 1, fc.beta_upper.begin(),
                                 [](double v, double hi) { return v <= hi; });

  std::optional<std::vector<double>> ref;
  if (inside) ref = truth;
  const FrechetFit fit = fit_frechet(row, model.sigma, scaling, fc, ref);

  rec.status = fit.fit.status;
  rec.criterion_value = fit.fit.criterion_value;
  rec.evaluations = fit.fit.evaluations;
  rec.eta_hat.push_back(fit.alpha_hat);
  rec.eta_hat.insert(rec.eta_hat.end(), fit.beta_hat.begin(), fit.beta_hat.end());
  rec.eta_hat.push_back(fit.gamma_hat);

  const double alpha_err = std::abs(fit.alpha_hat - cfg.eta0.front());
  const double beta_err = euclidean(fit.beta_hat, model.beta0);
  const double log_gamma_err = std::abs(std::log(fit.tau_hat / a_r));
  rec.component_errors = {alpha_err, beta_err, log_gamma_err};
  rec.error = std::sqrt(alpha_err * alpha_err + beta_err * beta_err + log_gamma_err * log_gamma_err);

  rec.reference_value = fit.fit.reference_value.value_or(kNaN);
  rec.gap_excluded = !inside || !fit.fit.reference_value || !std::isfinite(*fit.fit.reference_value) ||
                     fit.fit.status != FitStatus::success;
  rec.gap = rec.gap_excluded ? kNaN : fit.fit.criterion_value - *fit.fit.reference_value;
  return rec;
}

std::filesystem::path cell_path(const std::filesystem::path& dir, std::size_t n, std::size_t rep) {
  return dir / std::to_string(n) / (std::to_string(rep) + ".csv");
}

std::optional<ConsistencyRecord> load_cell(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  auto recs = records_from_csv(ss.str());
  if (recs.size() != 1) return std::nullopt;
  return recs.front();
}

}  // namespace

bool ConsistencyReport::components_monotone() const {
  for (std::size_t k = 1; k < summaries.size(); ++k) {
    const auto& prev = summaries[k - 1].component_medians;
    const auto& cur = summaries[k].component_medians;
    for (std::size_t c = 0; c < std::min(prev.size(), cur.size()); ++c) {
      if (cur[c] > prev[c]) return false;
    }
  }
  return true;
}

bool ConsistencyReport::thresholds_pass() const {
  if (summaries.empty()) return false;
  const auto& last = summaries.back();
  if (config.max_final_median_error && !(last.median_error < *config.max_final_median_error)) return false;
  const auto& limits = config.max_final_component_medians;
  for (std::size_t c = 0; c < limits.size(); ++c) {
    if (c >= last.component_medians.size() || !(last.component_medians[c] < limits[c])) return false;
  }
  if (config.require_monotone) {
    if (!monotone) return false;
    if (config.model == ModelKind::blockmax && !components_monotone()) return false;
  }
  return gaps_nonnegative;
}

void summarize(ConsistencyReport& report) {
  const auto& cfg = report.config;
  report.summaries.clear();
  report.gap_records = 0;
  report.gaps_nonnegative = true;
  for (std::size_t n : cfg.n_schedule) {
    SampleSizeSummary s;
    s.n = n;
    std::vector<double> errors;
    std::vector<std::vector<double>> comps;
    s.min_gap = std::numeric_limits<double>::infinity();
    for (const auto& rec : report.records) {
      if (rec.n != n) continue;
      if (rec.status != FitStatus::success) {
        ++s.degenerate;
        continue;
      }
      errors.push_back(rec.error);
      if (comps.size() < rec.component_errors.size()) comps.resize(rec.component_errors.size());
      for (std::size_t c = 0; c < rec.component_errors.size(); ++c) comps[c].push_back(rec.component_errors[c]);
      if (!rec.gap_excluded) {
        ++report.gap_records;
        s.min_gap = std::min(s.min_gap, rec.gap);
        if (!(rec.gap >= 0.0)) report.gaps_nonnegative = false;
      }
    }
    s.median_error = lower_median(errors);
    s.p90_error = quantile_of(errors, 0.9);
    for (auto& c : comps) s.component_medians.push_back(lower_median(c));

    // Bootstrap standard error of the median.
    if (errors.size() > 1) {
      RandomStream rng(derive_seed(cfg.master_seed, {n, 0xB0075u}));
      constexpr std::size_t kBoot = 200;
      std::vector<double> meds(kBoot), resample(errors.size());
      for (auto& m : meds) {
        for (auto& v : resample) {
          const auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(errors.size()));
          v = errors[std::min(idx, errors.size() - 1)];
        }
        m = lower_median(resample);
      }
      double mean = 0.0;
      for (double m : meds) mean += m;
      mean /= kBoot;
      double var = 0.0;
      for (double m : meds) var += (m - mean) * (m - mean);
      s.bootstrap_se = std::sqrt(var / (kBoot - 1));
    }
    report.summaries.push_back(std::move(s));
  }

  report.monotone = true;
  std::size_t inversions = 0;
  bool within_noise = true;
  for (std::size_t k = 1; k < report.summaries.size(); ++k) {
    const auto& a = report.summaries[k - 1];
    const auto& b = report.summaries[k];
    if (b.median_error > a.median_error) {
      report.monotone = false;
      ++inversions;
      const double tol = 1.5 * std::max(a.bootstrap_se, b.bootstrap_se);
      if (b.median_error - a.median_error > tol) within_noise = false;
    }
  }
  report.monotone_tolerant = inversions <= 1 && within_noise;
}

ConsistencyReport run_consistency(const ExperimentConfig& cfg,
                                  const std::optional<std::filesystem::path>& cell_dir) {
  cfg.validate();
  const auto design = *design_from_name(cfg.design);

  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t n : cfg.n_schedule) {
    for (std::size_t rep = 0; rep < cfg.replications; ++rep) cells.emplace_back(n, rep);
  }
  std::vector<ConsistencyRecord> records(cells.size());

  std::optional<LinkSpec> link;
  std::optional<ScoringRule> rule;
  std::optional<BoxDomain> box;
  std::optional<TailModel> tail;
  if (cfg.model == ModelKind::regression) {
    link = link_from_name(cfg.link);
    rule = ScoringRule::from_name(cfg.rule, cfg.energy);
    box.emplace(cfg.box_lower, cfg.box_upper);
  } else {
    tail = make_tail_model(cfg);
  }

  const auto count = static_cast<long long>(cells.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long long k = 0; k < count; ++k) {
    try {
      const auto [n, rep] = cells[static_cast<std::size_t>(k)];
      std::optional<ConsistencyRecord> rec;
      if (cell_dir) rec = load_cell(cell_path(*cell_dir, n, rep));
      if (!rec) {
        rec = cfg.model == ModelKind::regression
                  ? run_regression_cell(cfg, *link, design, *rule, *box, n, rep)
                  : run_blockmax_cell(cfg, *tail, design, n, rep);
        if (cell_dir) write_file_atomic(cell_path(*cell_dir, n, rep), records_to_csv(cfg.id, {*rec}));
      }
      records[static_cast<std::size_t>(k)] = std::move(*rec);
    } catch (...) {
#pragma omp critical(mest_harness_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  ConsistencyReport report;
  report.config = cfg;
  report.records = std::move(records);
  summarize(report);
  for (const auto& s : report.summaries) {
    if (2 * s.degenerate > cfg.replications) {
      throw ExperimentError("more than half of the fits at n = " + std::to_string(s.n) + " are degenerate (" +
                            std::to_string(s.degenerate) + " of " + std::to_string(cfg.replications) + ")");
    }
  }
  return report;
}

namespace {

// Averages g(m_eta, m_eta0) over draws (X, Y) from the limit law. Returns
// nullopt as soon as m_eta = -inf.
template <class Combine>
std::optional<PopulationEstimate> population_average(const LinkSpec& link, const CovariateDesign& design,
                                                     const ScoringRule& rule, std::span<const double> eta,
                                                     std::span<const double> eta0, std::size_t mc_size,
                                                     std::uint64_t seed, Combine combine) {
  if (mc_size < 2) throw DomainError("population_criterion requires mc_size >= 2");
  if (eta.size() != link.parameter_dim || eta0.size() != link.parameter_dim)
    throw DomainError("population_criterion: parameter dimension mismatch");
  const Family fam = link.family;
  RandomStream rng(seed);
  std::vector<double> x(design.dim);
  kernels::CompensatedSum sum, sum_sq;
  std::vector<double> bases;
  for (std::size_t i = 0; i < mc_size; ++i) {
    design.sample_limit(rng, x);
    const Theta th0 = link(x, eta0);
    const double y = fam.from_base(th0, fam.base_variate(rng.uniform()));
    const Theta th = link(x, eta);
    if (!fam.valid(th)) throw DomainError("population_criterion: link output is invalid at eta");
    double m = 0.0, m0 = 0.0;
    if (rule.kind == ScoringRuleKind::log) {
      m = fam.log_density(th, y);
      m0 = fam.log_density(th0, y);
    } else {
      bases = energy_base_variates(fam, rule.energy.mc_pairs, rule.energy.antithetic, rng);
      m = energy_score_from_bases(fam, th, y, bases, rule.energy.beta);
      m0 = energy_score_from_bases(fam, th0, y, bases, rule.energy.beta);
    }
    if (m == -std::numeric_limits<double>::infinity()) return std::nullopt;
    const double v = combine(m, m0);
    if (!std::isfinite(v)) throw NonFiniteCriterionError("population_criterion: non-finite score");
    sum.add(v);
    sum_sq.add(v * v);
  }
  const double nn = static_cast<double>(mc_size);
  const double mean = sum.value() / nn;
  const double var = std::max(0.0, (sum_sq.value() - nn * mean * mean) / (nn - 1.0));
  return PopulationEstimate{mean, std::sqrt(var / nn)};
}

}  // namespace

PopulationEstimate population_criterion(const LinkSpec& link, const CovariateDesign& design,
                                        const ScoringRule& rule, std::span<const double> eta,
                                        std::span<const double> eta0, std::size_t mc_size,
                                        std::uint64_t seed) {
  const auto est = population_average(link, design, rule, eta, eta0, mc_size, seed,
                                      [](double m, double) { return m; });
  if (!est) return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  return *est;
}

PopulationEstimate population_gap(const LinkSpec& link, const CovariateDesign& design, const ScoringRule& rule,
                                  std::span<const double> eta, std::span<const double> eta0,
                                  std::size_t mc_size, std::uint64_t seed) {
  const auto est = population_average(link, design, rule, eta, eta0, mc_size, seed,
                                      [](double m, double m0) { return m0 - m; });
  if (!est) return {std::numeric_limits<double>::infinity(), 0.0};
  return *est;
}

std::vector<double> default_t_grid() {
  std::vector<double> t(60);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = 0.1 * std::pow(10.0, 4.0 * static_cast<double>(k) / 59.0);
  return t;
}

TailEnvelopeReport tail_envelope_from_samples(const std::vector<std::vector<double>>& abs_values,
                                              const std::vector<double>& t_grid) {
  if (t_grid.empty()) throw DomainError("tail envelope requires a t grid");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()) || t_grid.front() < 0.0)
    throw DomainError("tail envelope t grid must be nonnegative and increasing");
  TailEnvelopeReport rep;
  rep.t_grid = t_grid;
  rep.envelope.assign(t_grid.size(), 0.0);
  std::size_t min_size = std::numeric_limits<std::size_t>::max();
  for (const auto& sample : abs_values) {
    if (sample.empty()) continue;
    min_size = std::min(min_size, sample.size());
    std::vector<double> s = sample;
    std::sort(s.begin(), s.end());
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      const auto above = s.end() - std::upper_bound(s.begin(), s.end(), t_grid[k]);
      rep.envelope[k] = std::max(rep.envelope[k], static_cast<double>(above) / static_cast<double>(s.size()));
    }
  }
  if (min_size == std::numeric_limits<std::size_t>::max()) throw DomainError("tail envelope: no samples");

  // E|m|^2 bound: 2 * int_0^inf t S(t) dt, trapezoid over the grid.
  double integral = 0.0;
  double prev_t = 0.0;
  double prev_f = 0.0;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double f = t_grid[k] * rep.envelope[k];
    integral += 0.5 * (f + prev_f) * (t_grid[k] - prev_t);
    prev_t = t_grid[k];
    prev_f = f;
  }
  rep.second_moment = 2.0 * integral;

  // Log-log slope over the upper tail: envelope in [10 / m, 0.1].
  const double floor = 10.0 / static_cast<double>(min_size);
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double s = rep.envelope[k];
    if (t_grid[k] > 0.0 && s <= 0.1 && s >= floor) {
      lx.push_back(std::log(t_grid[k]));
      ly.push_back(std::log(s));
    }
  }
  if (lx.size() >= 3) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
      sxy += (lx[k] - mx) * (ly[k] - my);
      sxx += (lx[k] - mx) * (lx[k] - mx);
    }
    rep.tail_slope = sxx > 0.0 ? sxy / sxx : kNaN;
  } else {
    rep.tail_slope = kNaN;
  }
  rep.heavy_tail = std::isfinite(rep.tail_slope) && rep.tail_slope > -2.0;
  return rep;
}

TailEnvelopeReport tail_envelope_diagnostic(const LinkSpec& link, const CovariateDesign& design,
                                            const ScoringRule& rule, std::span<const double> eta,
                                            std::span<const double> eta0,
                                            const std::vector<std::pair<std::size_t, std::size_t>>& cells,
                                            const std::vector<double>& t_grid, std::size_t mc_size,
                                            std::uint64_t seed) {
  if (mc_size == 0 || cells.empty()) throw DomainError("tail_envelope_diagnostic needs cells and mc_size >= 1");
  const Family fam = link.family;
  std::vector<std::vector<double>> samples;
  for (const auto& [n, i] : cells) {
    if (i >= n) throw DomainError("tail_envelope_diagnostic: cell index out of range");
    const auto xs = design.generate(n);
    const auto x = xs.row(i);
    const Theta th0 = link(x, eta0);
    const Theta th = link(x, eta);
    RandomStream rng(seed, {n, i});
    std::vector<double> values(mc_size);
    for (auto& v : values) {
      const double y = fam.from_base(th0, fam.base_variate(rng.uniform()));
      double m = 0.0;
      if (rule.kind == ScoringRuleKind::log) {
        m = fam.log_density(th, y);
      } else {
        const auto bases = energy_base_variates(fam, rule.energy.mc_pairs, rule.energy.antithetic, rng);
        m = energy_score_from_bases(fam, th, y, bases, rule.energy.beta);
      }
      v = std::abs(m);
    }
    samples.push_back(std::move(values));
  }
  return tail_envelope_from_samples(samples, t_grid);
}

TailEnvelopeReport tail_envelope_blockmax(const TailModel& model, const CovariateDesign& design,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& cells,
                                          const std::vector<double>& t_grid, std::size_t mc_size,
                                          std::uint64_t seed) {
  if (mc_size == 0 || cells.empty()) throw DomainError("tail_envelope_blockmax needs cells and mc_size >= 1");
  const double alpha = model.alpha0();
  std::vector<std::vector<double>> samples;
  for (const auto& [n, i] : cells) {
    if (i >= n) throw DomainError("tail_envelope_blockmax: cell index out of range");
    const std::size_t r = log_squared_block_size(n);
    const double a_r = model.baseline.norming(static_cast<double>(r));
    const auto xs = design.generate(n);
    const auto x = xs.row(i);
    const double c = model.c(x);
    const double scale = a_r * model.sigma(x, model.beta0);
    RandomStream rng(seed, {n, i});
    std::vector<double> values(mc_size);
    for (auto& v : values) {
      const double q = -std::expm1(std::log(rng.uniform()) / (c * static_cast<double>(r)));
      const double m = model.baseline.upper_quantile(q);
      const double lr = std::log(m / scale);
      v = std::abs(std::log(alpha) - std::log(scale) - (alpha + 1.0) * lr - std::exp(-alpha * lr));
    }
    samples.push_back(std::move(values));
  }
  return tail_envelope_from_samples(samples, t_grid);
}

}  // namespace mest

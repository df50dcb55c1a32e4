#include "mest/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "json_reader.hpp"
#include "mest/error.hpp"
#include "mest/harness.hpp"

namespace mest::cli {

using nlohmann::json;
using detail::ObjectReader;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 0;
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path output_root(const CommonOptions& opts) {
  if (!opts.out.empty()) return opts.out;
  if (const char* env = std::getenv("MEST_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
  return "results";
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'", 0);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config file '" + path + "' is not valid JSON: " + e.what(), 0);
  }
}

struct Manifest {
  json j;

  Manifest(const std::string& subcommand, const CommonOptions& opts, const json& snapshot, std::uint64_t seed) {
    j["subcommand"] = subcommand;
    j["config_path"] = opts.config;
    j["config"] = snapshot;
    j["tool_version"] = kToolVersion;
    j["master_seed"] = seed;
    j["started_at"] = utc_now();
  }

  void write(const std::filesystem::path& path) {
    j["finished_at"] = utc_now();
    write_file_atomic(path, j.dump(2) + "\n");
  }
};

TailModel tail_model(BaselineKind baseline, double alpha, std::vector<double> beta0, const std::string& sigma_link) {
  ScaleLink sigma;
  if (sigma_link == "loglinear") {
    sigma = loglinear_scale_link();
  } else if (sigma_link == "covariate-free") {
    sigma = covariate_free_scale_link();
  } else {
    throw ParseError("unknown sigma link '" + sigma_link + "'", 0);
  }
  return TailModel{TailBaseline(baseline, alpha), sigma, std::move(beta0)};
}

TailModel tail_model(const ExperimentConfig& cfg) {
  return tail_model(cfg.blockmax.baseline, cfg.eta0.front(),
                    std::vector<double>(cfg.eta0.begin() + 1, cfg.eta0.end()), cfg.blockmax.sigma_link);
}

BaselineKind parse_baseline(const std::string& s) {
  if (s == "pareto") return BaselineKind::pareto;
  if (s == "perturbed-pareto") return BaselineKind::perturbed_pareto;
  throw ParseError("baseline must be 'pareto' or 'perturbed-pareto'", 0);
}

std::string header_row(std::size_t dim, const std::string& last) {
  std::string h;
  for (std::size_t k = 0; k < dim; ++k) h += "x" + std::to_string(k + 1) + ",";
  return h + last + "\r\n";
}

std::string data_csv(const CovariateMatrix& xs, const std::vector<double>& values, const std::string& last) {
  std::string out = header_row(xs.dim, last);
  for (std::size_t i = 0; i < xs.n; ++i) {
    for (double v : xs.row(i)) out += format_double(v) + ",";
    out += format_double(values[i]) + "\r\n";
  }
  return out;
}

// ------------------------------------------------------------------ simulate

int cmd_simulate(const CommonOptions& opts, std::optional<std::size_t> n_opt, std::ostream& out) {
  const ExperimentConfig cfg = experiment_from_json(load_json(opts.config), opts.seed);
  const std::size_t n = n_opt.value_or(cfg.n_schedule.front());
  if (n == 0) throw ParseError("--n must be >= 1", 0);
  const auto design = *design_from_name(cfg.design);
  const std::uint64_t seed = derive_seed(cfg.master_seed, {n, 0, 0});

  Manifest manifest("simulate", opts, to_json(cfg), cfg.master_seed);
  manifest.j["n"] = n;
  manifest.j["data_seed"] = seed;
  std::string csv;
  if (cfg.model == ModelKind::regression) {
    const auto link = *link_from_name(cfg.link);
    const DesignRow row = generate_row(design, link, cfg.eta0, n, seed);
    csv = data_csv(row.covariates, row.responses, "y");
  } else {
    const TailModel model = tail_model(cfg);
    const std::size_t r = cfg.block_size(n);
    const BlockMaxRow row = sample_block_maxima(model, design, n, r, seed);
    csv = data_csv(row.covariates, row.maxima, "maximum");
    manifest.j["block_size"] = r;
    manifest.j["block_rule"] = cfg.blockmax.block_rule;
    manifest.j["norming_constant"] = model.baseline.norming(static_cast<double>(r));
  }
  const auto dir = output_root(opts) / cfg.id / "data";
  const auto data_path = dir / ("n" + std::to_string(n) + ".csv");
  write_file_atomic(data_path, csv);
  manifest.j["data_path"] = data_path.string();
  manifest.write(dir / ("n" + std::to_string(n) + ".manifest.json"));
  out << data_path.string() << "\n";
  return kOk;
}

// ----------------------------------------------------------------------- fit

json fit_json(const FitResult& fit) {
  json j;
  j["eta_hat"] = fit.eta_hat;
  j["criterion_value"] = std::isfinite(fit.criterion_value) ? json(fit.criterion_value) : json(nullptr);
  j["status"] = to_string(fit.status);
  j["evaluations"] = fit.evaluations;
  j["feasible_start_found"] = fit.feasible_start_found;
  j["on_boundary"] = fit.on_boundary;
  json trace = {{"length", fit.trace.size()}};
  if (!fit.trace.empty()) {
    trace["first_value"] = fit.trace.front().value;
    trace["last_value"] = fit.trace.back().value;
  }
  j["trace"] = trace;
  if (fit.reference_value) {
    j["reference_value"] = std::isfinite(*fit.reference_value) ? json(*fit.reference_value) : json(nullptr);
    if (std::isfinite(*fit.reference_value) && std::isfinite(fit.criterion_value))
      j["gap"] = fit.criterion_value - *fit.reference_value;
  }
  return j;
}

int cmd_fit(const CommonOptions& opts, const std::string& data_path, std::ostream& out) {
  const ExperimentConfig cfg = experiment_from_json(load_json(opts.config), opts.seed);
  std::ifstream in(data_path);
  if (!in) throw ParseError("cannot open data file '" + data_path + "'", 0);
  const CovariateMatrix table = parse_covariates(in);
  if (table.dim < 2) throw ParseError("data needs covariate columns and a response column", 0);
  const std::size_t n = table.n;
  const std::size_t dim = table.dim - 1;
  CovariateMatrix xs{n, dim, {}};
  std::vector<double> ys(n);
  xs.values.reserve(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = table.row(i);
    xs.values.insert(xs.values.end(), row.begin(), row.end() - 1);
    ys[i] = row.back();
  }

  json result;
  result["tool_version"] = kToolVersion;
  result["config_hash"] = config_hash(cfg);
  result["n"] = n;
  FitStatus status = FitStatus::degenerate;
  if (cfg.model == ModelKind::regression) {
    const auto link = *link_from_name(cfg.link);
    if (dim != link.covariate_dim)
      throw ParseError("data has " + std::to_string(dim) + " covariate columns; link '" + cfg.link + "' needs " +
                           std::to_string(link.covariate_dim),
                       0);
    DesignRow row{n, xs, ys, 0, link.id, 1};
    const BoxDomain box(cfg.box_lower, cfg.box_upper);
    const auto rule = *ScoringRule::from_name(cfg.rule, cfg.energy);
    std::optional<std::vector<double>> ref;
    if (box.contains(cfg.eta0)) ref = cfg.eta0;
    const FitResult fit = rule.kind == ScoringRuleKind::log
                              ? fit_mle(link, row, box, cfg.optimizer, ref)
                              : fit_optimum_score(rule, link, row, box, cfg.optimizer,
                                                  derive_seed(cfg.master_seed, {n, 0, 1}), ref);
    result["rule"] = rule.name();
    result["fit"] = fit_json(fit);
    status = fit.status;
  } else {
    const TailModel model = tail_model(cfg);
    BlockMaxRow row;
    row.n = n;
    row.block_size = cfg.block_size(n);
    row.covariates = xs;
    row.maxima = ys;
    const double a_r = model.baseline.norming(static_cast<double>(row.block_size));
    const double scaling = cfg.blockmax.scaling == "true" ? a_r : median_scaling(row);
    const std::size_t d = cfg.eta0.size() - 1;
    FrechetFitConfig fc;
    fc.alpha_range = {cfg.box_lower.front(), cfg.box_upper.front()};
    fc.beta_lower.assign(cfg.box_lower.begin() + 1, cfg.box_lower.begin() + 1 + static_cast<std::ptrdiff_t>(d));
    fc.beta_upper.assign(cfg.box_upper.begin() + 1, cfg.box_upper.begin() + 1 + static_cast<std::ptrdiff_t>(d));
    fc.gamma_range = {cfg.box_lower.back(), cfg.box_upper.back()};
    fc.optimizer = cfg.optimizer;
    const FrechetFit fit = fit_frechet(row, model.sigma, scaling, fc);
    result["rule"] = "log";
    result["block_size"] = row.block_size;
    result["fit"] = fit_json(fit.fit);
    result["frechet"] = {{"alpha_hat", fit.alpha_hat},     {"beta_hat", fit.beta_hat},
                         {"tau_hat", fit.tau_hat},         {"gamma_hat", fit.gamma_hat},
                         {"scaling_used", fit.scaling_used}, {"gamma_range", {fit.gamma_lower, fit.gamma_upper}}};
    status = fit.fit.status;
  }
  const std::string text = result.dump(2) + "\n";
  if (!opts.out.empty()) {
    write_file_atomic(opts.out, text);
  } else {
    out << text;
  }
  return status == FitStatus::success ? kOk : kDegenerateFit;
}

// ---------------------------------------------------------------- experiment

int cmd_experiment(const CommonOptions& opts, bool dry_run, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = experiment_from_json(load_json(opts.config), opts.seed);
  const auto dir = output_root(opts) / cfg.id;
  const std::string hash = config_hash(cfg);

  std::size_t existing = 0;
  for (std::size_t n : cfg.n_schedule) {
    for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
      if (std::filesystem::exists(dir / std::to_string(n) / (std::to_string(rep) + ".csv"))) ++existing;
    }
  }

  if (dry_run) {
    json plan;
    plan["experiment_id"] = cfg.id;
    plan["config_hash"] = hash;
    plan["output_dir"] = dir.string();
    plan["master_seed"] = cfg.master_seed;
    json sizes = json::array();
    for (std::size_t n : cfg.n_schedule) {
      json e = {{"n", n}, {"replications", cfg.replications}};
      if (cfg.model == ModelKind::blockmax) e["block_size"] = cfg.block_size(n);
      sizes.push_back(e);
    }
    plan["schedule"] = sizes;
    plan["cells_total"] = cfg.n_schedule.size() * cfg.replications;
    plan["cells_done"] = existing;
    plan["config"] = to_json(cfg);
    out << plan.dump(2) << "\n";
    return kOk;
  }

  // Cell files from a different configuration must never be mixed in.
  const auto stamp = dir / "config.json";
  if (std::filesystem::exists(stamp)) {
    std::ifstream in(stamp);
    json prev;
    try {
      prev = json::parse(in);
    } catch (const json::parse_error&) {
      throw ParseError(stamp.string() + " is corrupt", 0);
    }
    if (prev.value("config_hash", std::string()) != hash)
      throw ParseError(dir.string() + " holds results for a different configuration", 0);
  } else {
    write_file_atomic(stamp, json{{"config_hash", hash}, {"config", to_json(cfg)}}.dump(2) + "\n");
  }

  Manifest manifest("experiment", opts, to_json(cfg), cfg.master_seed);
  ConsistencyReport report;
  try {
    report = run_consistency(cfg, dir);
  } catch (const ExperimentError& e) {
    err << "experiment failed: " << e.what() << "\n";
    return kDegenerateFit;
  }
  const auto files = emit_report(report, output_root(opts));
  manifest.j["cells_reused"] = existing;
  manifest.j["config_hash"] = hash;
  manifest.write(dir / "manifest.json");

  for (const auto& s : report.summaries) {
    out << "n=" << s.n << " median_error=" << format_double(s.median_error)
        << " p90_error=" << format_double(s.p90_error) << " degenerate=" << s.degenerate << "\n";
  }
  out << "monotone=" << (report.monotone ? "yes" : "no") << " gaps_nonnegative="
      << (report.gaps_nonnegative ? "yes" : "no") << "\n";
  out << files.summary_json.string() << "\n";

  const bool has_thresholds =
      cfg.max_final_median_error || !cfg.max_final_component_medians.empty() || cfg.require_monotone;
  if (has_thresholds && !report.thresholds_pass()) {
    err << "experiment " << cfg.id << " failed its thresholds\n";
    return kThresholdFailure;
  }
  return kOk;
}

// --------------------------------------------------------------------- check

enum class CheckStatus { pass, advisory, fail };

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass:
      return "pass";
    case CheckStatus::advisory:
      return "advisory";
    case CheckStatus::fail:
      return "fail";
  }
  return "fail";
}

struct CheckOutcome {
  CheckStatus status = CheckStatus::fail;
  json details;
};

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

CheckOutcome check_doa(ObjectReader& r) {
  const auto model = tail_model(parse_baseline(r.required_as<std::string>("baseline")),
                                r.required_as<double>("alpha"), r.required_as<std::vector<double>>("beta0"),
                                [&] {
                                  std::string s = "loglinear";
                                  r.optional_into("sigma_link", s);
                                  return s;
                                }());
  const auto x_grid = r.required_as<std::vector<std::vector<double>>>("x_grid");
  const auto y_grid = r.required_as<std::vector<double>>("y_grid");
  const auto block_sizes = r.required_as<std::vector<std::size_t>>("block_sizes");
  std::optional<double> max_final;
  if (const json* v = r.optional("max_final_error")) max_final = r.as<double>("max_final_error", *v);
  r.reject_unknown();

  const DoaReport rep = check_doa_uniform(model, x_grid, y_grid, block_sizes);
  CheckOutcome o;
  json entries = json::array();
  for (const auto& e : rep.entries) {
    entries.push_back({{"block_size", e.block_size}, {"sup_error", e.sup_error}, {"sup_error_per_y", e.sup_error_per_y}});
  }
  o.details = {{"y_grid", y_grid}, {"entries", entries}, {"strictly_decreasing", rep.strictly_decreasing()}};
  bool ok = rep.strictly_decreasing();
  if (max_final && !rep.entries.empty()) ok = ok && rep.entries.back().sup_error < *max_final;
  o.status = ok ? CheckStatus::pass : CheckStatus::fail;
  return o;
}

CheckOutcome check_min_maxima(ObjectReader& r, std::uint64_t seed) {
  std::string sigma_link = "loglinear", design_id = "uniform";
  r.optional_into("sigma_link", sigma_link);
  r.optional_into("design", design_id);
  const auto model = tail_model(parse_baseline(r.required_as<std::string>("baseline")),
                                r.required_as<double>("alpha"), r.required_as<std::vector<double>>("beta0"),
                                sigma_link);
  const auto design = design_from_name(design_id);
  if (!design) throw ParseError("unknown design '" + design_id + "'", 0);
  const auto n_values = r.required_as<std::vector<std::size_t>>("n_values");
  const json& bs = r.required("block_size");
  const auto reps = r.required_as<std::size_t>("reps");
  const auto y = r.required_as<double>("y");
  const auto expect = r.required_as<bool>("expect_divergence");
  r.reject_unknown();

  std::vector<std::pair<std::size_t, std::size_t>> schedule;
  for (std::size_t n : n_values) {
    if (bs.is_string() && (bs == "log-squared" || bs == "(log n)^2")) {
      schedule.emplace_back(n, log_squared_block_size(n));
    } else if (bs.is_number_unsigned() && bs.get<std::size_t>() > 0) {
      schedule.emplace_back(n, bs.get<std::size_t>());
    } else {
      throw ParseError("field 'block_size' must be 'log-squared' or a positive integer", 0);
    }
  }
  const MinMaximaReport rep = check_min_maxima_divergence(model, *design, schedule, reps, y, seed);
  CheckOutcome o;
  json entries = json::array();
  for (const auto& e : rep.entries) {
    entries.push_back({{"n", e.n},
                       {"block_size", e.block_size},
                       {"median_min", e.median_min},
                       {"exceedance_frequency", e.exceedance_frequency},
                       {"standard_error", e.standard_error},
                       {"analytic_bound", e.analytic_bound},
                       {"bound_violated", e.bound_violated}});
  }
  o.details = {{"y", y}, {"entries", entries}, {"diverging", rep.diverging()}, {"any_violation", rep.any_violation()}};
  const bool ok = !rep.any_violation() && rep.diverging() == expect;
  o.status = ok ? CheckStatus::pass : CheckStatus::fail;
  return o;
}

CheckOutcome check_ident(ObjectReader& r, std::uint64_t seed) {
  const auto link_id = r.required_as<std::string>("link");
  std::string design_id = "uniform";
  r.optional_into("design", design_id);
  const auto eta0 = r.required_as<std::vector<double>>("eta0");
  ObjectReader g(r.required("grid"), "grid");
  const auto lower = g.required_as<std::vector<double>>("lower");
  const auto upper = g.required_as<std::vector<double>>("upper");
  const auto points = g.required_as<std::size_t>("points");
  g.reject_unknown();
  std::size_t mc_size = 1000;
  r.optional_into("mc_size", mc_size);
  r.reject_unknown();

  const auto link = link_from_name(link_id);
  if (!link) throw ParseError("unknown link '" + link_id + "'", 0);
  const auto design = design_from_name(design_id);
  if (!design) throw ParseError("unknown design '" + design_id + "'", 0);
  const BoxDomain box(lower, upper);
  const auto rep = check_identifiability(*link, *design, eta0, box.lattice(points), mc_size, seed);
  CheckOutcome o;
  json flagged = json::array();
  for (const auto& e : rep.entries) {
    if (e.violation) flagged.push_back(e.eta);
  }
  o.details = {{"grid_points", rep.entries.size()}, {"violations", rep.violation_count()}, {"flagged", flagged}};
  o.status = rep.violated() ? CheckStatus::fail : CheckStatus::pass;
  return o;
}

std::vector<std::pair<std::size_t, std::size_t>> envelope_cells(const std::vector<std::size_t>& n_values) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t n : n_values) {
    if (n == 0) throw ParseError("n_values entries must be >= 1", 0);
    cells.emplace_back(n, 0);
    if (n > 2) cells.emplace_back(n, n / 2);
    if (n > 1) cells.emplace_back(n, n - 1);
  }
  return cells;
}

json envelope_details(const TailEnvelopeReport& rep) {
  return {{"t_grid", rep.t_grid},
          {"envelope", rep.envelope},
          {"second_moment", finite_or_null(rep.second_moment)},
          {"tail_slope", finite_or_null(rep.tail_slope)},
          {"heavy_tail", rep.heavy_tail}};
}

CheckOutcome check_tail_envelope(ObjectReader& r, std::uint64_t seed) {
  const auto link_id = r.required_as<std::string>("link");
  std::string design_id = "uniform", rule_id = "log";
  r.optional_into("design", design_id);
  r.optional_into("rule", rule_id);
  EnergyConfig energy{1.0, 64, true};
  r.optional_into("energy_beta", energy.beta);
  r.optional_into("energy_pairs", energy.mc_pairs);
  const auto eta0 = r.required_as<std::vector<double>>("eta0");
  const auto n_values = r.required_as<std::vector<std::size_t>>("n_values");
  std::size_t mc_size = 10000;
  r.optional_into("mc_size", mc_size);
  r.reject_unknown();

  const auto link = link_from_name(link_id);
  if (!link) throw ParseError("unknown link '" + link_id + "'", 0);
  const auto design = design_from_name(design_id);
  if (!design) throw ParseError("unknown design '" + design_id + "'", 0);
  const auto rule = ScoringRule::from_name(rule_id, energy);
  if (!rule) throw ParseError("unknown rule '" + rule_id + "'", 0);
  const auto rep = tail_envelope_diagnostic(*link, *design, *rule, eta0, eta0, envelope_cells(n_values),
                                            default_t_grid(), mc_size, seed);
  return {rep.heavy_tail ? CheckStatus::advisory : CheckStatus::pass, envelope_details(rep)};
}

CheckOutcome check_tail_envelope_blockmax(ObjectReader& r, std::uint64_t seed) {
  std::string sigma_link = "loglinear", design_id = "uniform";
  r.optional_into("sigma_link", sigma_link);
  r.optional_into("design", design_id);
  const auto model = tail_model(parse_baseline(r.required_as<std::string>("baseline")),
                                r.required_as<double>("alpha"), r.required_as<std::vector<double>>("beta0"),
                                sigma_link);
  const auto n_values = r.required_as<std::vector<std::size_t>>("n_values");
  std::size_t mc_size = 10000;
  r.optional_into("mc_size", mc_size);
  r.reject_unknown();
  const auto design = design_from_name(design_id);
  if (!design) throw ParseError("unknown design '" + design_id + "'", 0);
  const auto rep = tail_envelope_blockmax(model, *design, envelope_cells(n_values), default_t_grid(), mc_size, seed);
  return {rep.heavy_tail ? CheckStatus::advisory : CheckStatus::pass, envelope_details(rep)};
}

CheckOutcome check_propriety(ObjectReader& r, std::uint64_t seed) {
  const auto rule_id = r.required_as<std::string>("rule");
  const auto family_id = r.required_as<std::string>("family");
  EnergyConfig energy{1.0, 1, true};
  r.optional_into("beta", energy.beta);
  const auto lower = r.required_as<std::vector<double>>("lower");
  const auto upper = r.required_as<std::vector<double>>("upper");
  std::size_t pairs = 50, mc_size = 100000;
  r.optional_into("pairs", pairs);
  r.optional_into("mc_size", mc_size);
  r.reject_unknown();
  const auto rule = ScoringRule::from_name(rule_id, energy);
  if (!rule) throw ParseError("unknown rule '" + rule_id + "'", 0);
  const auto family = Family::from_name(family_id);
  if (!family) throw ParseError("unknown family '" + family_id + "'", 0);
  const auto sweep = propriety_sweep(*rule, *family, lower, upper, pairs, mc_size, seed);
  std::size_t failures = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& c : sweep.checks) {
    if (!c.pass) ++failures;
    if (c.gap.standard_error > 0.0) worst = std::min(worst, c.gap.gap / c.gap.standard_error);
  }
  CheckOutcome o;
  o.details = {{"rule", sweep.rule}, {"pairs", pairs}, {"mc_size", mc_size}, {"failures", failures},
               {"min_gap_over_se", finite_or_null(worst)}};
  o.status = sweep.pass() ? CheckStatus::pass : CheckStatus::fail;
  return o;
}

int cmd_check(const CommonOptions& opts, std::ostream& out) {
  const json cfg = load_json(opts.config);
  ObjectReader r(cfg, "");
  if (r.required_as<int>("schema_version") != kSummarySchemaVersion)
    throw ParseError("unsupported schema_version", 0);
  const auto id = r.required_as<std::string>("id");
  std::optional<std::uint64_t> seed;
  if (const json* v = r.optional("seed")) seed = r.as<std::uint64_t>("seed", *v);
  if (opts.seed) seed = opts.seed;
  if (!seed) throw ParseError("missing required field 'seed' (or pass --seed)", 0);
  const json& checks = r.required("checks");
  r.reject_unknown();
  if (!checks.is_array() || checks.empty()) throw ParseError("field 'checks' must be a non-empty array", 0);

  json results = json::array();
  bool failed = false;
  for (std::size_t k = 0; k < checks.size(); ++k) {
    ObjectReader c(checks[k], "checks[" + std::to_string(k) + "]");
    const auto name = c.required_as<std::string>("name");
    const auto kind = c.required_as<std::string>("kind");
    const std::uint64_t check_seed = derive_seed(*seed, {k});
    CheckOutcome o;
    if (kind == "doa-uniform") {
      o = check_doa(c);
    } else if (kind == "min-maxima") {
      o = check_min_maxima(c, check_seed);
    } else if (kind == "identifiability") {
      o = check_ident(c, check_seed);
    } else if (kind == "tail-envelope") {
      o = check_tail_envelope(c, check_seed);
    } else if (kind == "tail-envelope-blockmax") {
      o = check_tail_envelope_blockmax(c, check_seed);
    } else if (kind == "propriety") {
      o = check_propriety(c, check_seed);
    } else {
      throw ParseError("checks[" + std::to_string(k) + "].kind '" + kind + "' is not a known check", 0);
    }
    failed = failed || o.status == CheckStatus::fail;
    results.push_back({{"name", name}, {"kind", kind}, {"status", to_string(o.status)}, {"details", o.details}});
  }

  json report = {{"schema_version", kSummarySchemaVersion},
                 {"id", id},
                 {"seed", *seed},
                 {"tool_version", kToolVersion},
                 {"checks", results}};
  write_file_atomic(output_root(opts) / id / "checks.json", report.dump(2) + "\n");
  for (const auto& c : results) {
    out << c["status"].get<std::string>() << " " << c["name"].get<std::string>() << " (" << c["kind"].get<std::string>()
        << ")\n";
  }
  return failed ? kDiagnosticFailure : kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"M-estimation experiments for distributional regression", "mest"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  CommonOptions opts;
  auto add_common = [&opts](CLI::App* sub) {
    sub->add_option("--config", opts.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "Master seed; overrides the config");
    sub->add_option("--jobs", opts.jobs, "Worker threads (default: all cores)")->check(CLI::PositiveNumber);
    sub->add_option("--out", opts.out, "Output root directory (fit: output file)");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate one data row from a scenario");
  add_common(simulate);
  std::optional<std::size_t> sim_n;
  simulate->add_option("--n", sim_n, "Row size (default: first entry of n_schedule)");

  auto* fit = app.add_subcommand("fit", "Fit a scenario's model to a data file");
  add_common(fit);
  std::string data_path;
  fit->add_option("--data", data_path, "Delimited data file; last column is the response")->required();

  auto* experiment = app.add_subcommand("experiment", "Run a Monte Carlo consistency experiment");
  add_common(experiment);
  bool dry_run = false;
  experiment->add_flag("--dry-run", dry_run, "Print the resolved plan without running it");

  auto* check = app.add_subcommand("check", "Run diagnostic checks");
  add_common(check);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  if (opts.jobs > 0) omp_set_num_threads(opts.jobs);

  try {
    if (*simulate) return cmd_simulate(opts, sim_n, out);
    if (*fit) return cmd_fit(opts, data_path, out);
    if (*experiment) return cmd_experiment(opts, dry_run, out, err);
    if (*check) return cmd_check(opts, out);
  } catch (const ParseError& e) {
    err << "config/data error";
    if (e.line() > 0) err << " at line " << e.line();
    err << ": " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "config/data error: " << e.what() << "\n";
    return kConfigError;
  } catch (const GenerationError& e) {
    err << "config/data error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace mest::cli

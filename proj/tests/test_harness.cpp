#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "mest/error.hpp"
#include "mest/harness.hpp"

using namespace mest;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json normal_location_config() {
  return json::parse(R"({
    "schema_version": 1, "id": "nl", "model": "regression", "link": "normal-location",
    "rule": "log", "eta0": [0.4], "box": {"lower": [-3], "upper": [3]},
    "n_schedule": [100, 400, 1600], "replications": 20, "master_seed": 3,
    "optimizer": {"lattice_points": 9, "starts": 2}
  })");
}

json small_gev_config() {
  return json::parse(R"({
    "schema_version": 1, "id": "gev-small", "model": "regression", "link": "gev-regression",
    "eta0": [1, 0.5, 0, 0.5, -0.2], "box": {"lower": [-1, -2, -1, -1, -0.9], "upper": [3, 2, 1, 1, 0.9]},
    "n_schedule": [60, 120], "replications": 3, "master_seed": 17,
    "optimizer": {"lattice_points": 2, "starts": 1, "max_iterations": 80, "restarts": 0}
  })");
}

json small_blockmax_config() {
  return json::parse(R"({
    "schema_version": 1, "id": "bm-small", "model": "blockmax",
    "blockmax": {"baseline": "pareto", "block_size": "(log n)^2", "scaling": "true"},
    "eta0": [2, 0.5], "box": {"lower": [0.3, -3, 0.2], "upper": [5, 3, 5]},
    "n_schedule": [100, 200], "replications": 3, "master_seed": 11,
    "optimizer": {"lattice_points": 3, "starts": 1, "max_iterations": 100, "restarts": 0}
  })");
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mest-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string parse_error_of(const json& j) {
  try {
    (void)experiment_from_json(j);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("format_double round-trips") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  RandomStream rng(1);
  for (int k = 0; k < 10000; ++k) {
    const double v = (rng.uniform() - 0.5) * std::exp(100.0 * (rng.uniform() - 0.5));
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("csv quoting") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  const auto rows = parse_csv("a,\"b,c\",\"d\"\"e\"\r\n\"multi\r\nline\",x,\r\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b,c", "d\"e"});
  CHECK(rows[1] == std::vector<std::string>{"multi\r\nline", "x", ""});
}

TEST_CASE("raw records round-trip through CSV") {
  ConsistencyRecord a;
  a.n = 100;
  a.rep = 3;
  a.data_seed = 0xFFFFFFFFFFFFFFFFull;
  a.score_seed = 7;
  a.status = FitStatus::success;
  a.error = 0.123456789012345678;
  a.component_errors = {0.1, 1e-17};
  a.gap = 0.0;
  a.criterion_value = -1.5;
  a.reference_value = -1.75;
  a.evaluations = 412;
  a.eta_hat = {0.5, -0.25, 3.0};
  ConsistencyRecord b;
  b.n = 400;
  b.status = FitStatus::degenerate;
  b.error = std::numeric_limits<double>::infinity();
  b.gap_excluded = true;
  b.criterion_value = -std::numeric_limits<double>::infinity();
  b.reference_value = -std::numeric_limits<double>::infinity();
  b.gap = std::numeric_limits<double>::quiet_NaN();
  const std::vector<ConsistencyRecord> recs{a, b};
  const auto csv = records_to_csv("exp,1", recs);
  CHECK(csv.find("\r\n") != std::string::npos);
  const auto back = records_from_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1].status == FitStatus::degenerate);
  CHECK(back[1].gap_excluded);
  CHECK(std::isnan(back[1].gap));
  CHECK(records_to_csv("exp,1", back) == csv);
  CHECK_THROWS_AS((void)records_from_csv("not,a,header\r\n"), ParseError);
}

TEST_CASE("config parsing and hashing") {
  const auto cfg = experiment_from_json(normal_location_config());
  CHECK(cfg.n_schedule == std::vector<std::size_t>{100, 400, 1600});
  CHECK(config_hash(cfg) == config_hash(experiment_from_json(normal_location_config())));
  CHECK(config_hash(cfg).size() == 64);
  CHECK(experiment_from_json(to_json(cfg)).eta0 == cfg.eta0);
  CHECK(config_hash(experiment_from_json(to_json(cfg))) == config_hash(cfg));

  auto alias = normal_location_config();
  alias["rule"] = "mle";
  CHECK(config_hash(experiment_from_json(alias)) == config_hash(cfg));

  CHECK(config_hash(experiment_from_json(normal_location_config(), 4)) != config_hash(cfg));

  auto j = normal_location_config();
  j.erase("master_seed");
  CHECK(parse_error_of(j).find("master_seed") != std::string::npos);
  CHECK(experiment_from_json(j, 9).master_seed == 9);

  j = normal_location_config();
  j["colour"] = "blue";
  CHECK(parse_error_of(j).find("colour") != std::string::npos);
  j = normal_location_config();
  j["box"]["middle"] = 1;
  CHECK(parse_error_of(j).find("middle") != std::string::npos);
  j = normal_location_config();
  j.erase("eta0");
  CHECK(parse_error_of(j).find("eta0") != std::string::npos);
  j = normal_location_config();
  j["replications"] = "many";
  CHECK(parse_error_of(j).find("replications") != std::string::npos);
  j = normal_location_config();
  j["n_schedule"] = {400, 100};
  CHECK(parse_error_of(j).find("increasing") != std::string::npos);
  j = normal_location_config();
  j["eta0"] = {0.1, 0.2};
  CHECK_FALSE(parse_error_of(j).empty());
  j = normal_location_config();
  j["link"] = "nope";
  CHECK_FALSE(parse_error_of(j).empty());
  j = normal_location_config();
  j["schema_version"] = 2;
  CHECK_FALSE(parse_error_of(j).empty());

  const auto bm = experiment_from_json(small_blockmax_config());
  CHECK(bm.block_size(1000) == 48);
  auto fixed = small_blockmax_config();
  fixed["blockmax"]["block_size"] = 5;
  CHECK(experiment_from_json(fixed).block_size(1000) == 5);
}

TEST_CASE("population criterion at the truth is the negative Gaussian entropy") {
  const auto link = normal_location_link();
  const auto design = uniform_grid_design();
  const std::vector<double> eta0{0.4};
  const auto est = population_criterion(link, design, ScoringRule::log_score(), eta0, eta0, 200000, 5);
  const double oracle = -0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  CHECK(oracle == doctest::Approx(-1.418939).epsilon(1e-6));
  CHECK(std::abs(est.value - oracle) < 3.0 * est.standard_error + 1e-3);
}

TEST_CASE("population criterion is maximized at the truth") {
  const auto link = gev_regression_link();
  const auto design = uniform_grid_design();
  const std::vector<double> eta0{1.0, 0.5, 0.0, 0.5, -0.2};
  const auto at0 = population_criterion(link, design, ScoringRule::log_score(), eta0, eta0, 20000, 8);
  // a grid around eta0 whose off-centre points are at least 0.3 away
  const BoxDomain box({0.7, 0.2, -0.3, 0.2, -0.5}, {1.3, 0.8, 0.3, 0.8, 0.1});
  std::size_t compared = 0;
  for (const auto& eta : box.lattice(3)) {
    const auto est = population_criterion(link, design, ScoringRule::log_score(), eta, eta0, 20000, 8);
    CHECK(est.value <= at0.value + 3.0 * std::max(est.standard_error, at0.standard_error));
    if (box.distance(eta, eta0) > 0.25) {
      ++compared;
      const auto gap = population_gap(link, design, ScoringRule::log_score(), eta, eta0, 20000, 8);
      CHECK(gap.value > 3.0 * gap.standard_error);
    }
  }
  CHECK(compared > 200);

  EnergyConfig ec;
  ec.mc_pairs = 16;
  const auto energy = ScoringRule::energy_score(ec);
  const auto nl = normal_location_link();
  const std::vector<double> t0{0.4}, far{2.0};
  const auto e0 = population_criterion(nl, design, energy, t0, t0, 20000, 2);
  const auto e1 = population_criterion(nl, design, energy, far, t0, 20000, 2);
  CHECK(e0.value - e1.value > 3.0 * std::hypot(e0.standard_error, e1.standard_error));
}

TEST_CASE("tail envelope diagnostic") {
  const auto grid = default_t_grid();
  CHECK(grid.size() == 60);
  CHECK(grid.front() == doctest::Approx(0.1));
  CHECK(grid.back() == doctest::Approx(1000.0));

  const std::vector<std::pair<std::size_t, std::size_t>> cells{{100, 0}, {100, 50}, {1000, 999}};
  const auto normal = tail_envelope_diagnostic(normal_location_link(), uniform_grid_design(), ScoringRule::log_score(),
                                               std::vector<double>{0.0}, std::vector<double>{0.0}, cells, grid,
                                               20000, 1);
  CHECK_FALSE(normal.heavy_tail);
  CHECK(std::isfinite(normal.second_moment));
  // E m^2 for m = -log(2 pi)/2 - Z^2/2 is about 2.3
  CHECK(normal.second_moment == doctest::Approx(2.35).epsilon(0.15));
  for (std::size_t k = 1; k < normal.envelope.size(); ++k) CHECK(normal.envelope[k] <= normal.envelope[k - 1]);

  const TailModel model{pareto_baseline(2.0), loglinear_scale_link(), {0.5}};
  const auto frechet = tail_envelope_blockmax(model, uniform_grid_design(), {{250, 1}, {1000, 500}}, grid, 20000, 2);
  CHECK_FALSE(frechet.heavy_tail);

  // |m| with a Pareto(1.5) tail: infinite second moment
  RandomStream rng(3);
  std::vector<std::vector<double>> heavy(3, std::vector<double>(20000));
  for (auto& s : heavy)
    for (auto& v : s) v = std::pow(rng.uniform(), -1.0 / 1.5);
  const auto flagged = tail_envelope_from_samples(heavy, grid);
  CHECK(flagged.heavy_tail);
  CHECK(flagged.tail_slope == doctest::Approx(-1.5).epsilon(0.2));
}

TEST_CASE("normal location experiment converges") {
  const auto cfg = experiment_from_json(normal_location_config());
  const auto report = run_consistency(cfg);
  REQUIRE(report.summaries.size() == 3);
  CHECK(report.records.size() == 60);
  CHECK(report.summaries[2].median_error < 0.06);
  CHECK(report.monotone_tolerant);
  CHECK(report.gaps_nonnegative);
  CHECK(report.gap_records == 60);
  // roughly n^-1/2: a 16x larger sample should at least halve the error
  CHECK(report.summaries[2].median_error < 0.5 * report.summaries[0].median_error);
}

TEST_CASE("redundant parameterisation does not shrink") {
  auto j = normal_location_config();
  j["id"] = "redundant";
  j["link"] = "normal-redundant";
  j["eta0"] = {0.3, 0.2};
  j["box"] = {{"lower", {-2, -2}}, {"upper", {2, 2}}};
  j["replications"] = 8;
  j["optimizer"] = {{"lattice_points", 5}, {"starts", 1}};
  const auto report = run_consistency(experiment_from_json(j));
  CHECK(report.summaries.back().median_error > 0.1);
}

TEST_CASE("gap bookkeeping") {
  auto j = normal_location_config();
  j["box"] = {{"lower", {1}}, {"upper", {2}}};
  j["n_schedule"] = {50};
  j["replications"] = 3;
  const auto outside = run_consistency(experiment_from_json(j));
  for (const auto& r : outside.records) CHECK(r.gap_excluded);
  CHECK(outside.gap_records == 0);

  const auto gev = run_consistency(experiment_from_json(small_gev_config()));
  for (const auto& r : gev.records) {
    if (!r.gap_excluded) {
      CHECK(r.gap >= 0.0);
      CHECK(r.gap == r.criterion_value - r.reference_value);
    }
  }
}

TEST_CASE("summaries and verdicts from synthetic records") {
  ConsistencyReport report;
  report.config = experiment_from_json(normal_location_config());
  report.config.n_schedule = {10, 20, 40};
  const std::vector<std::vector<double>> errs{{0.5, 0.4, 0.6, 0.45}, {0.2, 0.3, 0.25, 0.35}, {0.21, 0.31, 0.26, 0.3}};
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t r = 0; r < 4; ++r) {
      ConsistencyRecord rec;
      rec.n = report.config.n_schedule[k];
      rec.rep = r;
      rec.status = FitStatus::success;
      rec.error = errs[k][r];
      rec.gap = 0.1;
      report.records.push_back(rec);
    }
  }
  summarize(report);
  CHECK(report.summaries[0].median_error == 0.45);
  CHECK(report.summaries[1].median_error == 0.25);
  CHECK(report.summaries[2].median_error == 0.26);
  CHECK(report.summaries[0].p90_error >= 0.5);
  CHECK_FALSE(report.monotone);
  CHECK(report.monotone_tolerant);
  for (std::size_t r = 8; r < 12; ++r) report.records[r].error = 5.0 + 0.1 * static_cast<double>(r);
  summarize(report);
  CHECK_FALSE(report.monotone_tolerant);
}

TEST_CASE("experiments are deterministic and resumable") {
  const auto cfg = experiment_from_json(small_gev_config());
  const auto a = run_consistency(cfg);
  const auto b = run_consistency(cfg);
  CHECK(records_to_csv(cfg.id, a.records) == records_to_csv(cfg.id, b.records));

  const auto dir = scratch_dir("resume");
  const auto first = run_consistency(cfg, dir / "cells");
  CHECK(records_to_csv(cfg.id, first.records) == records_to_csv(cfg.id, a.records));
  CHECK(fs::exists(dir / "cells" / "60" / "0.csv"));
  fs::remove(dir / "cells" / "120" / "2.csv");
  const auto resumed = run_consistency(cfg, dir / "cells");
  CHECK(records_to_csv(cfg.id, resumed.records) == records_to_csv(cfg.id, a.records));

  const auto files = emit_report(resumed, dir);
  CHECK(read_file(files.raw_csv) == records_to_csv(cfg.id, a.records));
  const auto summary = json::parse(read_file(files.summary_json));
  CHECK(summary["schema_version"] == kSummarySchemaVersion);
  CHECK(summary["config_hash"] == config_hash(cfg));
  CHECK(summary["summaries"].size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("blockmax experiment records three components") {
  const auto cfg = experiment_from_json(small_blockmax_config());
  const auto report = run_consistency(cfg);
  for (const auto& r : report.records) {
    CHECK(r.component_errors.size() == 3);
    CHECK(r.eta_hat.size() == 3);
    if (!r.gap_excluded) CHECK(r.gap >= 0.0);
  }
  CHECK(report.summaries[0].component_medians.size() == 3);
}

TEST_CASE("degenerate experiments fail loudly") {
  auto j = normal_location_config();
  j["link"] = "gev-constant";
  j["eta0"] = {0.0, 0.0, -0.5};
  // every location in the box lies far above the data, so xi > 0 puts them all outside the support
  j["box"] = {{"lower", {50, -1, 0.5}}, {"upper", {60, 0, 0.9}}};
  j["n_schedule"] = {30};
  j["replications"] = 3;
  CHECK_THROWS_AS((void)run_consistency(experiment_from_json(j)), ExperimentError);
}

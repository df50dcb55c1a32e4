#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include <openssl/evp.h>

#include "mest/error.hpp"
#include "mest/harness.hpp"
#include "json_reader.hpp"

namespace mest {

using nlohmann::json;

using detail::ObjectReader;

namespace {

bool safe_id(const std::string& id) {
  return !id.empty() && id != "." && id != ".." &&
         std::all_of(id.begin(), id.end(), [](char c) {
           return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
         });
}

}  // namespace

std::size_t ExperimentConfig::block_size(std::size_t n) const {
  if (blockmax.block_rule == "log-squared") return log_squared_block_size(n);
  if (blockmax.block_rule == "fixed" && blockmax.fixed_block_size > 0) return blockmax.fixed_block_size;
  throw DomainError("unknown block size rule '" + blockmax.block_rule + "'");
}

void ExperimentConfig::validate() const {
  if (!safe_id(id)) throw DomainError("experiment id must be non-empty and use [A-Za-z0-9._-]");
  if (n_schedule.empty()) throw DomainError("n_schedule must not be empty");
  for (std::size_t k = 0; k < n_schedule.size(); ++k) {
    if (n_schedule[k] == 0) throw DomainError("n_schedule entries must be >= 1");
    if (k > 0 && n_schedule[k] <= n_schedule[k - 1])
      throw DomainError("n_schedule must be strictly increasing");
  }
  if (replications == 0) throw DomainError("replications must be >= 1");
  if (box_lower.size() != box_upper.size()) throw DomainError("box lower and upper differ in length");
  for (std::size_t k = 0; k < box_lower.size(); ++k) {
    if (!std::isfinite(box_lower[k]) || !std::isfinite(box_upper[k]) || box_lower[k] > box_upper[k])
      throw DomainError("box bounds must be finite with lower <= upper");
  }
  for (double v : eta0) {
    if (!std::isfinite(v)) throw DomainError("eta0 must be finite");
  }
  if (optimizer.lattice_points < 1) throw DomainError("optimizer.lattice_points must be >= 1");

  if (model == ModelKind::regression) {
    const auto l = link_from_name(link);
    if (!l) throw DomainError("unknown link '" + link + "'");
    if (!design_from_name(design)) throw DomainError("unknown design '" + design + "'");
    if (!ScoringRule::from_name(rule, energy)) throw DomainError("unknown scoring rule '" + rule + "'");
    energy.validate();
    if (eta0.size() != l->parameter_dim)
      throw DomainError("eta0 has " + std::to_string(eta0.size()) + " entries; link '" + link + "' needs " +
                        std::to_string(l->parameter_dim));
    if (box_lower.size() != l->parameter_dim) throw DomainError("box dimension does not match the link");
  } else {
    if (eta0.size() < 2) throw DomainError("blockmax eta0 must be (alpha0, beta0...)");
    if (!(eta0[0] > 0.0)) throw DomainError("blockmax alpha0 must be > 0");
    if (box_lower.size() != eta0.size() + 1) throw DomainError("blockmax box must cover (alpha, beta..., gamma)");
    if (!(box_lower.front() > 0.0)) throw DomainError("blockmax alpha range must be positive");
    if (!(box_lower.back() > 0.0)) throw DomainError("blockmax gamma range must be positive");
    if (blockmax.sigma_link != "loglinear" && blockmax.sigma_link != "covariate-free")
      throw DomainError("unknown sigma link '" + blockmax.sigma_link + "'");
    if (blockmax.scaling != "true" && blockmax.scaling != "median")
      throw DomainError("scaling must be 'true' or 'median'");
    (void)block_size(n_schedule.front());
    if (!design_from_name(design)) throw DomainError("unknown design '" + design + "'");
  }
  if (!max_final_component_medians.empty() && model != ModelKind::blockmax)
    throw DomainError("component thresholds apply to blockmax experiments only");
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["id"] = cfg.id;
  j["model"] = cfg.model == ModelKind::regression ? "regression" : "blockmax";
  j["design"] = cfg.design;
  j["eta0"] = cfg.eta0;
  j["box"] = {{"lower", cfg.box_lower}, {"upper", cfg.box_upper}};
  j["n_schedule"] = cfg.n_schedule;
  j["replications"] = cfg.replications;
  j["master_seed"] = cfg.master_seed;
  j["optimizer"] = {{"lattice_points", cfg.optimizer.lattice_points},
                    {"starts", cfg.optimizer.starts},
                    {"max_iterations", cfg.optimizer.max_iterations},
                    {"tolerance", cfg.optimizer.tolerance},
                    {"restarts", cfg.optimizer.restarts}};
  if (cfg.model == ModelKind::regression) {
    j["link"] = cfg.link;
    j["rule"] = cfg.rule;
    j["energy"] = {{"beta", cfg.energy.beta},
                   {"mc_pairs", cfg.energy.mc_pairs},
                   {"antithetic", cfg.energy.antithetic}};
  } else {
    json b;
    b["baseline"] = cfg.blockmax.baseline == BaselineKind::pareto ? "pareto" : "perturbed-pareto";
    b["sigma_link"] = cfg.blockmax.sigma_link;
    if (cfg.blockmax.block_rule == "fixed") {
      b["block_size"] = cfg.blockmax.fixed_block_size;
    } else {
      b["block_size"] = cfg.blockmax.block_rule;
    }
    b["scaling"] = cfg.blockmax.scaling;
    j["blockmax"] = b;
  }
  json t = json::object();
  if (cfg.max_final_median_error) t["max_final_median_error"] = *cfg.max_final_median_error;
  if (!cfg.max_final_component_medians.empty())
    t["max_final_component_medians"] = cfg.max_final_component_medians;
  if (cfg.require_monotone) t["require_monotone"] = true;
  if (!t.empty()) j["thresholds"] = t;
  return j;
}

ExperimentConfig experiment_from_json(const json& j, std::optional<std::uint64_t> seed_override) {
  ObjectReader r(j, "");
  const auto version = r.required_as<int>("schema_version");
  if (version != kSummarySchemaVersion)
    throw ParseError("unsupported schema_version " + std::to_string(version), 0);

  ExperimentConfig cfg;
  cfg.id = r.required_as<std::string>("id");
  const auto model = r.required_as<std::string>("model");
  if (model == "regression") {
    cfg.model = ModelKind::regression;
  } else if (model == "blockmax") {
    cfg.model = ModelKind::blockmax;
  } else {
    throw ParseError("field 'model' must be 'regression' or 'blockmax'", 0);
  }
  cfg.eta0 = r.required_as<std::vector<double>>("eta0");
  {
    ObjectReader b(r.required("box"), "box");
    cfg.box_lower = b.required_as<std::vector<double>>("lower");
    cfg.box_upper = b.required_as<std::vector<double>>("upper");
    b.reject_unknown();
  }
  cfg.n_schedule = r.required_as<std::vector<std::size_t>>("n_schedule");
  std::optional<std::uint64_t> seed;
  if (const json* v = r.optional("master_seed")) seed = r.as<std::uint64_t>("master_seed", *v);
  if (seed_override) seed = seed_override;
  if (!seed) throw ParseError("missing required field 'master_seed' (or pass --seed)", 0);
  cfg.master_seed = *seed;
  r.optional_into("replications", cfg.replications);
  r.optional_into("design", cfg.design);

  if (cfg.model == ModelKind::regression) {
    cfg.link = r.required_as<std::string>("link");
    r.optional_into("rule", cfg.rule);
    // Aliases resolve to their canonical rule so equal models hash equally.
    if (cfg.rule == "mle") cfg.rule = "log";
    if (const json* e = r.optional("energy")) {
      ObjectReader er(*e, "energy");
      er.optional_into("beta", cfg.energy.beta);
      er.optional_into("mc_pairs", cfg.energy.mc_pairs);
      er.optional_into("antithetic", cfg.energy.antithetic);
      er.reject_unknown();
    }
    if (cfg.rule == "crps") {
      cfg.rule = "energy";
      cfg.energy.beta = 1.0;
    }
  } else {
    ObjectReader br(r.required("blockmax"), "blockmax");
    const auto baseline = br.required_as<std::string>("baseline");
    if (baseline == "pareto") {
      cfg.blockmax.baseline = BaselineKind::pareto;
    } else if (baseline == "perturbed-pareto") {
      cfg.blockmax.baseline = BaselineKind::perturbed_pareto;
    } else {
      throw ParseError("field 'blockmax.baseline' must be 'pareto' or 'perturbed-pareto'", 0);
    }
    br.optional_into("sigma_link", cfg.blockmax.sigma_link);
    br.optional_into("scaling", cfg.blockmax.scaling);
    if (const json* bs = br.optional("block_size")) {
      if (bs->is_number_integer() && bs->get<std::int64_t>() > 0) {
        cfg.blockmax.block_rule = "fixed";
        cfg.blockmax.fixed_block_size = bs->get<std::size_t>();
      } else if (bs->is_string()) {
        cfg.blockmax.block_rule = bs->get<std::string>();
        if (cfg.blockmax.block_rule == "(log n)^2") cfg.blockmax.block_rule = "log-squared";
      } else {
        throw ParseError("field 'blockmax.block_size' must be 'log-squared' or a positive integer", 0);
      }
    }
    br.reject_unknown();
  }

  if (const json* o = r.optional("optimizer")) {
    ObjectReader orr(*o, "optimizer");
    orr.optional_into("lattice_points", cfg.optimizer.lattice_points);
    orr.optional_into("starts", cfg.optimizer.starts);
    orr.optional_into("max_iterations", cfg.optimizer.max_iterations);
    orr.optional_into("tolerance", cfg.optimizer.tolerance);
    orr.optional_into("restarts", cfg.optimizer.restarts);
    orr.reject_unknown();
  }
  if (const json* t = r.optional("thresholds")) {
    ObjectReader tr(*t, "thresholds");
    if (const json* v = tr.optional("max_final_median_error"))
      cfg.max_final_median_error = tr.as<double>("max_final_median_error", *v);
    tr.optional_into("max_final_component_medians", cfg.max_final_component_medians);
    tr.optional_into("require_monotone", cfg.require_monotone);
    tr.reject_unknown();
  }
  r.reject_unknown();

  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what(), 0);
  }
  return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(buf, sizeof buf, "%02x", digest[k]);
    hex += buf;
  }
  return hex;
}

}  // namespace mest

#include "mest/designs.hpp"

#include <algorithm>
#include <boost/random/sobol.hpp>
#include <boost/random/uniform_01.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <istream>
#include <sstream>

#include "mest/error.hpp"

namespace mest {

std::vector<double> uniform_design(std::size_t n) {
  if (n == 0) throw DomainError("uniform_design requires n >= 1");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  return x;
}

CovariateDesign uniform_grid_design() {
  CovariateDesign d;
  d.id = "uniform";
  d.dim = 1;
  d.limit_law = "Uniform(0,1]";
  d.generate = [](std::size_t n) {
    return CovariateMatrix{n, 1, uniform_design(n)};
  };
  d.sample_limit = [](RandomStream& rng, std::span<double> out) { out[0] = rng.uniform(); };
  return d;
}

CovariateDesign sobol_box_design(std::vector<double> lower, std::vector<double> upper) {
  if (lower.empty() || lower.size() != upper.size())
    throw DomainError("sobol_box_design: bounds must be nonempty and of equal length");
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (!(lower[k] < upper[k])) throw DomainError("sobol_box_design: require lower < upper");
  }
  CovariateDesign d;
  d.id = "sobol";
  d.dim = lower.size();
  d.limit_law = "uniform on the box";
  d.generate = [lower, upper](std::size_t n) {
    const std::size_t dim = lower.size();
    CovariateMatrix m{n, dim, std::vector<double>(n * dim)};
    boost::random::sobol qrng(static_cast<unsigned>(dim));
    boost::random::uniform_01<double> unit;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        m.values[i * dim + k] = lower[k] + (upper[k] - lower[k]) * unit(qrng);
      }
    }
    return m;
  };
  d.sample_limit = [lower, upper](RandomStream& rng, std::span<double> out) {
    for (std::size_t k = 0; k < lower.size(); ++k) out[k] = lower[k] + (upper[k] - lower[k]) * rng.uniform();
  };
  return d;
}

CovariateDesign file_design(CovariateMatrix rows, std::string id) {
  if (rows.n == 0) throw DomainError("file_design: no covariate rows");
  CovariateDesign d;
  d.id = std::move(id);
  d.dim = rows.dim;
  d.limit_law = "uniform over the file rows";
  auto shared = std::make_shared<const CovariateMatrix>(std::move(rows));
  d.generate = [shared](std::size_t n) {
    const std::size_t m = shared->n, dim = shared->dim;
    CovariateMatrix out{n, dim, std::vector<double>(n * dim)};
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = (i * m) / n;
      std::copy_n(shared->values.begin() + static_cast<std::ptrdiff_t>(src * dim), dim,
                  out.values.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    return out;
  };
  d.sample_limit = [shared](RandomStream& rng, std::span<double> out) {
    const auto j = std::min(shared->n - 1,
                            static_cast<std::size_t>(rng.uniform() * static_cast<double>(shared->n)));
    std::copy_n(shared->values.begin() + static_cast<std::ptrdiff_t>(j * shared->dim), shared->dim,
                out.begin());
  };
  return d;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  const auto is_sep = [](char c) { return c == ',' || c == ';' || c == '\t' || c == ' '; };
  const bool has_hard_sep = line.find_first_of(",;\t") != std::string_view::npos;
  std::size_t i = 0;
  while (i <= line.size()) {
    std::size_t j = i;
    while (j < line.size() && !(has_hard_sep ? (line[j] == ',' || line[j] == ';' || line[j] == '\t')
                                             : is_sep(line[j])))
      ++j;
    std::string_view f = line.substr(i, j - i);
    while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
    while (!f.empty() && f.back() == ' ') f.remove_suffix(1);
    if (has_hard_sep || !f.empty()) fields.push_back(f);
    i = j + 1;
  }
  return fields;
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

CovariateMatrix parse_covariates(std::istream& in) {
  CovariateMatrix m;
  m.n = 0;
  m.dim = 0;
  std::string line;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_fields(line);
    std::vector<double> row;
    bool numeric = true;
    for (auto f : fields) {
      auto v = parse_number(f);
      if (!v) {
        numeric = false;
        break;
      }
      if (!std::isfinite(*v))
        throw ParseError("non-finite covariate on line " + std::to_string(line_no), line_no);
      row.push_back(*v);
    }
    if (!numeric) {
      if (!seen_data && line_no == 1) continue;  // header
      throw ParseError("unparsable covariate on line " + std::to_string(line_no), line_no);
    }
    if (!seen_data) {
      m.dim = row.size();
      seen_data = true;
    } else if (row.size() != m.dim) {
      throw ParseError("expected " + std::to_string(m.dim) + " columns on line " +
                           std::to_string(line_no) + ", got " + std::to_string(row.size()),
                       line_no);
    }
    m.values.insert(m.values.end(), row.begin(), row.end());
    ++m.n;
  }
  if (!seen_data) throw ParseError("covariate file contains no data rows", line_no);
  return m;
}

CovariateMatrix read_covariate_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open covariate file " + path.string(), 0);
  return parse_covariates(in);
}

double loglinear_scale(std::span<const double> beta, std::span<const double> x) {
  if (beta.size() != x.size())
    throw DomainError("loglinear_scale: dimension mismatch (" + std::to_string(beta.size()) +
                      " vs " + std::to_string(x.size()) + ")");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += beta[k] * x[k];
  return std::exp(s);
}

LinkSpec normal_mean_link(std::size_t dim, double sd) {
  LinkSpec l;
  l.id = "normal-mean";
  l.family = Family(FamilyKind::normal);
  l.parameter_dim = dim;
  l.covariate_dim = dim;
  l.map = [sd](std::span<const double> x, std::span<const double> eta) {
    double m = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) m += eta[k] * x[k];
    return Theta{m, sd, 0.0};
  };
  return l;
}

LinkSpec normal_location_link(double sd) {
  LinkSpec l;
  l.id = "normal-location";
  l.family = Family(FamilyKind::normal);
  l.parameter_dim = 1;
  l.covariate_dim = 1;
  l.map = [sd](std::span<const double>, std::span<const double> eta) {
    return Theta{eta[0], sd, 0.0};
  };
  return l;
}

LinkSpec normal_redundant_link(double sd) {
  LinkSpec l;
  l.id = "normal-redundant";
  l.family = Family(FamilyKind::normal);
  l.parameter_dim = 2;
  l.covariate_dim = 1;
  l.map = [sd](std::span<const double>, std::span<const double> eta) {
    return Theta{eta[0] + eta[1], sd, 0.0};
  };
  return l;
}

LinkSpec normal_location_scale_link() {
  LinkSpec l;
  l.id = "normal-location-scale";
  l.family = Family(FamilyKind::normal);
  l.parameter_dim = 3;
  l.covariate_dim = 1;
  l.map = [](std::span<const double> x, std::span<const double> eta) {
    return Theta{eta[0] + eta[1] * x[0], std::exp(eta[2]), 0.0};
  };
  return l;
}

LinkSpec gev_regression_link() {
  LinkSpec l;
  l.id = "gev-regression";
  l.family = Family(FamilyKind::gev);
  l.parameter_dim = 5;
  l.covariate_dim = 1;
  l.map = [](std::span<const double> x, std::span<const double> eta) {
    return Theta{eta[0] + eta[1] * x[0], std::exp(eta[2] + eta[3] * x[0]), eta[4]};
  };
  return l;
}

LinkSpec gev_constant_link() {
  LinkSpec l;
  l.id = "gev-constant";
  l.family = Family(FamilyKind::gev);
  l.parameter_dim = 3;
  l.covariate_dim = 1;
  l.map = [](std::span<const double>, std::span<const double> eta) {
    return Theta{eta[0], std::exp(eta[1]), eta[2]};
  };
  return l;
}

LinkSpec gp_regression_link() {
  LinkSpec l;
  l.id = "gp-regression";
  l.family = Family(FamilyKind::gp);
  l.parameter_dim = 3;
  l.covariate_dim = 1;
  l.map = [](std::span<const double> x, std::span<const double> eta) {
    return Theta{std::exp(eta[0] + eta[1] * x[0]), eta[2], 0.0};
  };
  return l;
}

LinkSpec point_mass_link() {
  LinkSpec l;
  l.id = "point-mass";
  l.family = Family(FamilyKind::point_mass);
  l.parameter_dim = 1;
  l.covariate_dim = 1;
  l.map = [](std::span<const double>, std::span<const double> eta) {
    return Theta{eta[0], 0.0, 0.0};
  };
  return l;
}

std::optional<LinkSpec> link_from_name(std::string_view id) {
  if (id == "normal-mean") return normal_mean_link(1);
  if (id == "normal-location") return normal_location_link();
  if (id == "normal-redundant") return normal_redundant_link();
  if (id == "normal-location-scale") return normal_location_scale_link();
  if (id == "gev-regression") return gev_regression_link();
  if (id == "gev-constant") return gev_constant_link();
  if (id == "gp-regression") return gp_regression_link();
  if (id == "point-mass") return point_mass_link();
  return std::nullopt;
}

std::vector<std::string> builtin_link_names() {
  return {"normal-mean",   "normal-location", "normal-redundant", "normal-location-scale",
          "gev-regression", "gev-constant",   "gp-regression",    "point-mass"};
}

std::optional<CovariateDesign> design_from_name(std::string_view id) {
  if (id == "uniform") return uniform_grid_design();
  if (id == "sobol") return sobol_box_design({0.0}, {1.0});
  return std::nullopt;
}

DesignRow generate_row(const CovariateDesign& design, const LinkSpec& link,
                       std::span<const double> eta0, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("generate_row requires n >= 1");
  if (eta0.size() != link.parameter_dim)
    throw DomainError("generate_row: eta0 has dimension " + std::to_string(eta0.size()) +
                      ", link " + link.id + " expects " + std::to_string(link.parameter_dim));
  if (design.dim != link.covariate_dim)
    throw DomainError("generate_row: design dimension does not match link " + link.id);

  DesignRow row;
  row.n = n;
  row.seed = seed;
  row.kernel = link.id + "/" + std::string(link.family.name());
  row.covariates = design.generate(n);
  row.responses.resize(n);
  RandomStream rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const Theta theta = link(row.covariates.row(i), eta0);
    if (!link.family.valid(theta))
      throw GenerationError("link " + link.id + " produced invalid parameters at index " +
                                std::to_string(i),
                            i);
    row.responses[i] = link.family.from_base(theta, link.family.base_variate(rng.uniform()));
  }
  return row;
}

bool IdentifiabilityReport::violated() const { return violation_count() > 0; }

std::size_t IdentifiabilityReport::violation_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.violation; }));
}

IdentifiabilityReport check_identifiability(const LinkSpec& link, const CovariateDesign& design,
                                            std::span<const double> eta0,
                                            const std::vector<std::vector<double>>& grid,
                                            std::size_t mc_size, std::uint64_t seed) {
  constexpr double kTie = 1e-12;
  IdentifiabilityReport report;
  report.mc_size = mc_size;

  // Common covariate draws for all grid points.
  std::vector<double> xs(mc_size * design.dim);
  RandomStream rng(seed);
  for (std::size_t j = 0; j < mc_size; ++j)
    design.sample_limit(rng, std::span<double>(xs).subspan(j * design.dim, design.dim));

  std::vector<Theta> reference(mc_size);
  for (std::size_t j = 0; j < mc_size; ++j)
    reference[j] = link(std::span<const double>(xs).subspan(j * design.dim, design.dim), eta0);

  for (const auto& eta : grid) {
    IdentifiabilityEntry e;
    e.eta = eta;
    bool same = eta.size() == eta0.size();
    for (std::size_t k = 0; same && k < eta.size(); ++k) same = std::abs(eta[k] - eta0[k]) <= kTie;
    e.is_reference = same;
    if (!same) {
      std::size_t differ = 0;
      for (std::size_t j = 0; j < mc_size; ++j) {
        const Theta t = link(std::span<const double>(xs).subspan(j * design.dim, design.dim), eta);
        for (std::size_t k = 0; k < t.size(); ++k) {
          if (std::abs(t[k] - reference[j][k]) > kTie) {
            ++differ;
            break;
          }
        }
      }
      e.mass = mc_size == 0 ? 0.0 : static_cast<double>(differ) / static_cast<double>(mc_size);
      e.violation = differ == 0;
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace mest

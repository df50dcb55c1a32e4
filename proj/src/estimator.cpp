#include "mest/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "mest/error.hpp"
#include "mest/kernels.hpp"

namespace mest {

namespace {

std::string format_eta(std::span<const double> eta) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t k = 0; k < eta.size(); ++k) os << (k ? ", " : "") << eta[k];
  os << ')';
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------- BoxDomain

BoxDomain::BoxDomain(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.empty()) throw DomainError("box must have at least one dimension");
  if (lower_.size() != upper_.size()) throw DomainError("box bounds differ in length");
  for (std::size_t k = 0; k < lower_.size(); ++k) {
    if (!std::isfinite(lower_[k]) || !std::isfinite(upper_[k]) || !(lower_[k] < upper_[k]))
      throw DomainError("box requires finite lower < upper in every coordinate (coordinate " +
                        std::to_string(k) + ")");
  }
}

bool BoxDomain::contains(std::span<const double> eta) const {
  if (eta.size() != dim()) return false;
  for (std::size_t k = 0; k < dim(); ++k) {
    if (!(eta[k] >= lower_[k] && eta[k] <= upper_[k])) return false;
  }
  return true;
}

std::vector<double> BoxDomain::clip(std::span<const double> eta) const {
  std::vector<double> out(dim());
  for (std::size_t k = 0; k < dim(); ++k) out[k] = std::clamp(eta[k], lower_[k], upper_[k]);
  return out;
}

double BoxDomain::distance(std::span<const double> a, std::span<const double> b) const {
  if (a.size() != dim() || b.size() != dim()) throw DomainError("distance: dimension mismatch");
  double ss = 0.0;
  for (std::size_t k = 0; k < dim(); ++k) ss += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(ss);
}

bool BoxDomain::on_boundary(std::span<const double> eta, double tol) const {
  for (std::size_t k = 0; k < dim(); ++k) {
    const double w = tol * (upper_[k] - lower_[k]);
    if (eta[k] - lower_[k] <= w || upper_[k] - eta[k] <= w) return true;
  }
  return false;
}

std::vector<std::vector<double>> BoxDomain::lattice(std::size_t points_per_dim) const {
  if (points_per_dim == 0) throw DomainError("lattice needs at least one point per dimension");
  std::size_t total = 1;
  for (std::size_t k = 0; k < dim(); ++k) total *= points_per_dim;
  std::vector<std::vector<double>> pts;
  pts.reserve(total);
  std::vector<std::size_t> idx(dim(), 0);
  for (std::size_t p = 0; p < total; ++p) {
    std::vector<double> x(dim());
    for (std::size_t k = 0; k < dim(); ++k) {
      x[k] = points_per_dim == 1
                 ? 0.5 * (lower_[k] + upper_[k])
                 : lower_[k] + (upper_[k] - lower_[k]) * static_cast<double>(idx[k]) /
                                   static_cast<double>(points_per_dim - 1);
    }
    pts.push_back(std::move(x));
    for (std::size_t k = dim(); k-- > 0;) {
      if (++idx[k] < points_per_dim) break;
      idx[k] = 0;
    }
  }
  return pts;
}

// ---------------------------------------------------------------- criterion

double criterion_value(const Criterion& crit, std::span<const double> eta) {
  if (crit.domain && !crit.domain->contains(eta))
    throw DomainError("criterion evaluated outside the parameter box at eta = " + format_eta(eta));
  if (crit.n == 0) throw DomainError("criterion has no observations");
  auto term = [&](std::size_t i) { return crit.term(eta, i); };
  const kernels::ReductionResult r =
      crit.parallel ? kernels::sum_terms_parallel(crit.n, term) : kernels::sum_terms_serial(crit.n, term);
  if (r.has_invalid)
    throw NonFiniteCriterionError("criterion term " + std::to_string(r.first_invalid) +
                                  " is NaN or +inf at eta = " + format_eta(eta));
  return r.mean(crit.n);
}

std::string to_string(FitStatus status) {
  return status == FitStatus::success ? "success" : "degenerate";
}

// ---------------------------------------------------------------- maximize

namespace {

struct Vertex {
  std::vector<double> x;
  double f = kNegInf;
};

/// Tracks the incumbent and evaluation count across every stage of a fit.
class Search {
 public:
  Search(const Objective& f, const BoxDomain& box) : f_(f), box_(box) {}

  double eval(std::span<const double> x) {
    const double v = f_(x);
    ++evaluations_;
    check(v, x);
    offer(x, v);
    return v;
  }

  static void check(double v, std::span<const double> x) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw NonFiniteCriterionError("criterion is " + std::string(std::isnan(v) ? "NaN" : "+inf") +
                                    " at eta = " + format_eta(x));
  }

  /// Replaces the incumbent on strict improvement only, so the earliest
  /// (lexicographically smallest lattice) point wins exact ties.
  void offer(std::span<const double> x, double v) {
    if (v > best_.f || (best_.x.empty() && v == kNegInf)) {
      best_.x.assign(x.begin(), x.end());
      best_.f = v;
      if (v > kNegInf) trace_.push_back({best_.x, v});
    }
  }

  void count(std::size_t n) { evaluations_ += n; }

  const Vertex& best() const { return best_; }
  std::size_t evaluations() const { return evaluations_; }
  std::vector<TracePoint>& trace() { return trace_; }
  const BoxDomain& box() const { return box_; }

 private:
  const Objective& f_;
  const BoxDomain& box_;
  Vertex best_;
  std::size_t evaluations_ = 0;
  std::vector<TracePoint> trace_;
};

Vertex nelder_mead(Search& search, Vertex start, const std::vector<double>& steps,
                   const MaximizeConfig& cfg) {
  const BoxDomain& box = search.box();
  const std::size_t d = box.dim();
  std::vector<Vertex> s(d + 1);
  s[0] = std::move(start);
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> x = s[0].x;
    x[k] += (x[k] + steps[k] <= box.upper()[k]) ? steps[k] : -steps[k];
    x = box.clip(x);
    s[k + 1].f = search.eval(x);
    s[k + 1].x = std::move(x);
  }

  auto combine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
    // a + t (b - a), clipped to the box
    std::vector<double> x(d);
    for (std::size_t k = 0; k < d; ++k) x[k] = a[k] + t * (b[k] - a[k]);
    return box.clip(x);
  };

  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    std::stable_sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.f > b.f; });
    double diameter = 0.0;
    for (std::size_t k = 1; k <= d; ++k) diameter = std::max(diameter, box.distance(s[0].x, s[k].x));
    if (diameter < cfg.tolerance) break;

    std::vector<double> centroid(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t j = 0; j < d; ++j) centroid[j] += s[k].x[j] / static_cast<double>(d);
    }
    Vertex& worst = s[d];
    std::vector<double> xr = combine(centroid, worst.x, -1.0);
    const double fr = search.eval(xr);

    if (fr > s[0].f) {
      std::vector<double> xe = combine(centroid, worst.x, -2.0);
      const double fe = search.eval(xe);
      if (fe > fr) {
        worst = {std::move(xe), fe};
      } else {
        worst = {std::move(xr), fr};
      }
      continue;
    }
    if (fr > s[d - 1].f) {
      worst = {std::move(xr), fr};
      continue;
    }
    bool accepted = false;
    if (fr > worst.f) {
      std::vector<double> xc = combine(centroid, xr, 0.5);
      const double fc = search.eval(xc);
      if (fc >= fr) {
        worst = {std::move(xc), fc};
        accepted = true;
      }
    } else {
      std::vector<double> xc = combine(centroid, worst.x, 0.5);
      const double fc = search.eval(xc);
      if (fc > worst.f) {
        worst = {std::move(xc), fc};
        accepted = true;
      }
    }
    if (!accepted) {
      for (std::size_t k = 1; k <= d; ++k) {
        s[k].x = combine(s[0].x, s[k].x, 0.5);
        s[k].f = search.eval(s[k].x);
      }
    }
  }
  std::stable_sort(s.begin(), s.end(), [](const Vertex& a, const Vertex& b) { return a.f > b.f; });
  return s[0];
}

}  // namespace

FitResult maximize(const Objective& f, const BoxDomain& box, const MaximizeConfig& cfg,
                   std::optional<std::vector<double>> reference) {
  if (reference && reference->size() != box.dim())
    throw DomainError("reference parameter has the wrong dimension");
  Search search(f, box);
  FitResult result;

  const auto lattice = box.lattice(cfg.lattice_points);
  std::vector<double> values(lattice.size(), kNegInf);
  {
    const auto count = static_cast<long long>(lattice.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) if (cfg.parallel && count > 1)
    for (long long p = 0; p < count; ++p) {
      try {
        const auto& x = lattice[static_cast<std::size_t>(p)];
        const double v = f(x);
        Search::check(v, x);
        values[static_cast<std::size_t>(p)] = v;
      } catch (...) {
#pragma omp critical(mest_lattice_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    search.count(lattice.size());
  }

  // Incumbent: maximal lattice value; within 1e-12 of it, the lexicographically
  // smallest point (the lattice is enumerated lexicographically).
  std::vector<std::size_t> order(lattice.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  const double top = values[order.front()];
  std::size_t best_index = order.front();
  if (top > kNegInf) {
    const double tie = 1e-12 * std::max(1.0, std::abs(top));
    for (std::size_t p = 0; p < lattice.size(); ++p) {
      if (values[p] >= top - tie) {
        best_index = p;
        break;
      }
    }
  }
  search.offer(lattice[best_index], values[best_index]);

  std::vector<Vertex> starts;
  if (top > kNegInf) {
    starts.push_back({lattice[best_index], values[best_index]});
    for (std::size_t p : order) {
      if (starts.size() >= cfg.starts) break;
      if (p == best_index || values[p] == kNegInf) continue;
      starts.push_back({lattice[p], values[p]});
    }
  }
  if (reference) {
    std::vector<double> r = *reference;
    if (box.contains(r)) {
      const double fr = search.eval(r);
      result.reference_value = fr;
      if (fr > kNegInf) starts.push_back({std::move(r), fr});
    }
  }
  result.feasible_start_found = !starts.empty();

  std::vector<double> steps(box.dim());
  for (std::size_t k = 0; k < box.dim(); ++k) {
    const double width = box.upper()[k] - box.lower()[k];
    steps[k] = cfg.lattice_points > 1 ? 0.5 * width / static_cast<double>(cfg.lattice_points - 1)
                                      : 0.1 * width;
  }

  for (const Vertex& start : starts) {
    Vertex v = nelder_mead(search, start, steps, cfg);
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
      const double before = v.f;
      v = nelder_mead(search, v, steps, cfg);
      if (!(v.f > before)) break;
    }
  }

  result.evaluations = search.evaluations();
  result.trace = std::move(search.trace());
  const Vertex& best = search.best();
  result.eta_hat = best.x;
  result.criterion_value = best.f;
  result.status = best.f > kNegInf ? FitStatus::success : FitStatus::degenerate;
  result.on_boundary = box.on_boundary(result.eta_hat);
  return result;
}

FitResult maximize(const Criterion& crit, const BoxDomain& box, const MaximizeConfig& cfg,
                   std::optional<std::vector<double>> reference) {
  Criterion bounded = crit;
  bounded.domain = box;
  // Lattice points already run in parallel; keep the inner reduction serial there.
  const Objective f = [&bounded](std::span<const double> eta) { return criterion_value(bounded, eta); };
  return maximize(f, box, cfg, std::move(reference));
}

// ---------------------------------------------------------------- fits

namespace {

Theta link_theta(const LinkSpec& link, const DesignRow& data, std::span<const double> eta,
                 std::size_t i) {
  const Theta theta = link(data.covariates.row(i), eta);
  if (!link.family.valid_for_estimation(theta)) {
    throw DomainError("link " + link.id + " maps eta = " + format_eta(eta) +
                      " outside the estimation parameter space at observation " + std::to_string(i) +
                      " (GEV/GP require xi > -1)");
  }
  return theta;
}

void check_dimensions(const LinkSpec& link, const DesignRow& data) {
  if (data.responses.size() != data.n || data.covariates.n != data.n)
    throw DomainError("data row has inconsistent lengths");
  if (data.covariates.dim != link.covariate_dim)
    throw DomainError("covariate dimension " + std::to_string(data.covariates.dim) +
                      " does not match link " + link.id);
}

}  // namespace

Criterion log_score_criterion(const LinkSpec& link, const DesignRow& data) {
  check_dimensions(link, data);
  Criterion c;
  c.n = data.n;
  c.term = [link = std::make_shared<const LinkSpec>(link), data = std::make_shared<const DesignRow>(data)](
               std::span<const double> eta, std::size_t i) {
    return link->family.log_density(link_theta(*link, *data, eta, i), data->responses[i]);
  };
  return c;
}

Criterion score_criterion(const ScoringRule& rule, const LinkSpec& link, const DesignRow& data,
                          std::uint64_t seed) {
  if (rule.kind == ScoringRuleKind::log) return log_score_criterion(link, data);
  check_dimensions(link, data);
  rule.energy.validate();
  const std::size_t pairs = rule.energy.mc_pairs;
  auto bases = std::make_shared<std::vector<double>>();
  bases->reserve(data.n * 2 * pairs);
  RandomStream rng(seed);
  for (std::size_t i = 0; i < data.n; ++i) {
    auto b = energy_base_variates(link.family, pairs, rule.energy.antithetic, rng);
    bases->insert(bases->end(), b.begin(), b.end());
  }
  Criterion c;
  c.n = data.n;
  const double beta = rule.energy.beta;
  c.term = [link = std::make_shared<const LinkSpec>(link), data = std::make_shared<const DesignRow>(data), bases,
            pairs, beta](std::span<const double> eta, std::size_t i) {
    const Theta theta = link_theta(*link, *data, eta, i);
    return energy_score_from_bases(
        link->family, theta, data->responses[i],
        std::span<const double>(*bases).subspan(i * 2 * pairs, 2 * pairs), beta);
  };
  return c;
}

FitResult fit_mle(const LinkSpec& link, const DesignRow& data, const BoxDomain& box,
                  const MaximizeConfig& cfg, std::optional<std::vector<double>> reference) {
  if (box.dim() != link.parameter_dim)
    throw DomainError("box dimension does not match link " + link.id);
  return maximize(log_score_criterion(link, data), box, cfg, std::move(reference));
}

FitResult fit_optimum_score(const ScoringRule& rule, const LinkSpec& link, const DesignRow& data,
                            const BoxDomain& box, const MaximizeConfig& cfg, std::uint64_t seed,
                            std::optional<std::vector<double>> reference) {
  if (box.dim() != link.parameter_dim)
    throw DomainError("box dimension does not match link " + link.id);
  return maximize(score_criterion(rule, link, data, seed), box, cfg, std::move(reference));
}

}  // namespace mest

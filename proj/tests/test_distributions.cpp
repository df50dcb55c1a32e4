#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mest/distributions.hpp"
#include "mest/error.hpp"
#include "oracles.hpp"

using namespace mest;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double gev_density(const GevParams& t, double y) { return std::exp(gev_logpdf(t, y)); }

}  // namespace

TEST_CASE("gev logpdf examples") {
  CHECK(gev_logpdf({0, 1, 0}, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(gev_logpdf({0, 1, 0.5}, -3) == kNegInf);
  const double expected = std::log(std::pow(2.0, -2.0) * std::exp(-0.5));
  CHECK(gev_logpdf({0, 1, 1}, 1) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(-1.886294).epsilon(1e-6));
  // the same density integrates to one over its support (-1, inf)
  CHECK(oracle::integrate_ts([](double y) { return gev_density({0, 1, 1}, y); }, -1.0, kInf) ==
        doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("gev cdf examples") {
  CHECK(gev_cdf({0, 1, 1}, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  for (double y : {2.0, 2.5, 10.0}) CHECK(gev_cdf({0, 1, -0.5}, y) == 1.0);
  const GevParams t{0, 1, 0.3};
  const double lower = -1.0 / 0.3;
  const double integral = oracle::integrate_ts([&](double y) { return gev_density(t, y); }, lower, 1.7);
  CHECK(std::abs(gev_cdf(t, 1.7) - integral) < 1e-8);
  CHECK(gev_cdf(t, lower - 1.0) == 0.0);
}

TEST_CASE("gev sampler") {
  RandomStream rng(7);
  const GevParams t{0, 1, 0.5};
  const auto s = gev_sample(t, rng, 10000);
  CHECK(oracle::ks_distance(s, [&](double y) { return gev_cdf(t, y); }) < 0.02);

  RandomStream rng1(1);
  const auto bounded = gev_sample({0, 1, -0.5}, rng1, 1000);
  CHECK(*std::max_element(bounded.begin(), bounded.end()) < 2.0);

  RandomStream a(42), b(42);
  CHECK(gev_sample(t, a, 100) == gev_sample(t, b, 100));
}

TEST_CASE("gev xi near zero joins the Gumbel branch continuously") {
  for (double y : {-2.0, -0.5, 0.0, 0.7, 3.0}) {
    const double gumbel = gev_logpdf({0.3, 1.5, 0.0}, y);
    for (double xi : {1e-9, -1e-9, 1e-6, -1e-6, 5e-5}) {
      CHECK(gev_logpdf({0.3, 1.5, xi}, y) == doctest::Approx(gumbel).epsilon(1e-3));
      CHECK(gev_cdf({0.3, 1.5, xi}, y) == doctest::Approx(gev_cdf({0.3, 1.5, 0.0}, y)).epsilon(1e-3));
    }
  }
}

TEST_CASE("gev boundary points are outside the support") {
  CHECK(gev_logpdf({0, 1, -0.5}, 2.0) == kNegInf);
  CHECK(gev_logpdf({0, 1, 0.5}, -2.0) == kNegInf);
  CHECK(std::isfinite(gev_logpdf({0, 1, 0.5}, -1.999)));
}

TEST_CASE("invalid parameters and non-finite y raise domain errors") {
  CHECK_THROWS_AS((void)gev_logpdf({0, 0, 0}, 1), DomainError);
  CHECK_THROWS_AS((void)gev_logpdf({0, 1, 0}, std::nan("")), DomainError);
  CHECK_THROWS_AS((void)gp_logpdf({-1, 0}, 1), DomainError);
  CHECK_THROWS_AS((void)frechet_logpdf({1, 0}, 1), DomainError);
  CHECK_THROWS_AS((void)normal_logpdf({0, -1}, 1), DomainError);
  CHECK_THROWS_AS((void)frechet_quantile({1, 1}, 0.0), DomainError);
  CHECK_THROWS_AS((void)frechet_quantile({1, 1}, 1.0), DomainError);
}

TEST_CASE("gp examples") {
  CHECK(gp_logpdf({1, 0}, 1) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(gp_logpdf({1, -0.5}, 3) == kNegInf);
  CHECK(gp_logpdf({2, 1}, 2) == doctest::Approx(std::log(0.125)).epsilon(1e-14));
  CHECK(gp_cdf({1, 1}, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(gp_cdf({1, 0}, kInf) == 1.0);
  CHECK(gp_cdf({1, 0}, 1e6) == 1.0);
  RandomStream rng(3);
  for (double y : gp_sample({1, -0.5}, rng, 1000)) {
    CHECK(y > 0.0);
    CHECK(y < 2.0);
  }
  CHECK(gp_logpdf({1, 0.2}, 0.0) == kNegInf);
  CHECK(gp_logpdf({1, -0.5}, 2.0) == kNegInf);
}

TEST_CASE("gp probability integral transform is unit exponential") {
  const GpParams t{1.7, 0.35};
  RandomStream rng(11);
  auto s = gp_sample(t, rng, 100000);
  for (auto& y : s) y = -std::log1p(-gp_cdf(t, y));
  const double d = oracle::ks_distance(s, [](double e) { return -std::expm1(-e); });
  CHECK(d < oracle::ks_critical_1e3(s.size()));
}

TEST_CASE("gp density is bounded by 1/a") {
  for (double a : {0.5, 1.0, 3.0}) {
    for (double xi : {-0.9, -0.5, 0.0, 0.5, 2.0}) {
      for (double y = 1e-6; y < 20.0; y *= 1.3) {
        CHECK(gp_logpdf({a, xi}, y) <= -std::log(a) + 1e-12);
      }
    }
  }
}

TEST_CASE("frechet examples") {
  CHECK(frechet_logpdf({1, 1}, 1) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(frechet_logpdf({1, 2}, -1) == kNegInf);
  CHECK(frechet_logpdf({1, 2}, 0) == kNegInf);
  CHECK(frechet_logpdf({2, 1}, 2) == doctest::Approx(std::log(std::exp(-1.0) / 2.0)).epsilon(1e-14));
  for (double alpha : {0.5, 1.0, 3.0}) CHECK(frechet_cdf({1, alpha}, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(frechet_cdf({2, 1}, 2) == doctest::Approx(std::exp(-1.0)));
  CHECK(frechet_quantile({1, 2}, std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(frechet_quantile({1, 1}, 0.5) == doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-14));
  CHECK(frechet_cdf({1, 1}, -3) == 0.0);
}

TEST_CASE("frechet quantile round trip") {
  const FrechetParams t{1.3, 2.2};
  double worst = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double y = 0.4 + 0.05 * k;
    worst = std::max(worst, std::abs(frechet_quantile(t, frechet_cdf(t, y)) - y));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("frechet sample: Y^-alpha is unit exponential") {
  RandomStream rng(5);
  const auto s = frechet_sample({1, 2}, rng, 100000);
  double mean = 0.0;
  for (double y : s) mean += std::pow(y, -2.0);
  mean /= static_cast<double>(s.size());
  CHECK(std::abs(mean - 1.0) < 0.02);
}

TEST_CASE("normal examples") {
  CHECK(normal_logpdf({0, 1}, 0) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-15));
  CHECK(normal_cdf({0, 1}, 0) == 0.5);
  RandomStream rng(9);
  const auto s = normal_sample({3, 2}, rng, 100000);
  double mean = 0.0;
  for (double y : s) mean += y;
  mean /= static_cast<double>(s.size());
  CHECK(std::abs(mean - 3.0) < 0.03);
  CHECK(std::isfinite(normal_logpdf({0, 1}, 1e150)));
}

TEST_CASE("densities integrate to one over random valid parameters") {
  RandomStream rng(2024);
  auto u = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
  for (int k = 0; k < 10; ++k) {
    const Family gev(FamilyKind::gev), gp(FamilyKind::gp), fr(FamilyKind::frechet), nm(FamilyKind::normal);
    for (auto [fam, theta] : {std::pair{gev, Theta{u(-2, 2), u(0.3, 3), u(-0.9, 0.9)}},
                              std::pair{gp, Theta{u(0.3, 3), u(-0.9, 0.9), 0}},
                              std::pair{fr, Theta{u(0.3, 3), u(0.5, 5), 0}},
                              std::pair{nm, Theta{u(-2, 2), u(0.3, 3), 0}}}) {
      const auto [lo, hi] = fam.support(theta);
      const double total =
          oracle::integrate_ts([&](double y) { return std::exp(fam.log_density(theta, y)); }, lo, hi);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("log density is -inf exactly off the support and samples stay inside") {
  RandomStream rng(77);
  const std::vector<std::pair<Family, Theta>> cases = {
      {Family(FamilyKind::gev), {0.5, 1.2, -0.4}}, {Family(FamilyKind::gev), {0.5, 1.2, 0.4}},
      {Family(FamilyKind::gp), {1.5, -0.3, 0}},    {Family(FamilyKind::gp), {1.5, 0.6, 0}},
      {Family(FamilyKind::frechet), {2.0, 1.5, 0}}, {Family(FamilyKind::normal), {0.0, 2.0, 0}}};
  for (const auto& [fam, theta] : cases) {
    const auto [lo, hi] = fam.support(theta);
    for (double y : fam.sample(theta, rng, 100000)) {
      REQUIRE(y > lo);
      REQUIRE(y < hi);
    }
    if (std::isfinite(lo)) {
      CHECK(fam.log_density(theta, lo) == kNegInf);
      CHECK(fam.log_density(theta, lo - 0.5) == kNegInf);
      CHECK(fam.cdf(theta, lo - 0.5) == 0.0);
      CHECK(std::isfinite(fam.log_density(theta, lo + 1e-3)));
    }
    if (std::isfinite(hi)) {
      CHECK(fam.log_density(theta, hi) == kNegInf);
      CHECK(fam.log_density(theta, hi + 0.5) == kNegInf);
      CHECK(fam.cdf(theta, hi + 0.5) == 1.0);
    }
  }
}

TEST_CASE("gev log density is bounded above on a compact parameter box") {
  double max_value = -kInf;
  for (double sigma = 0.5; sigma <= 2.0; sigma += 0.25) {
    for (double xi = -0.8; xi <= 0.8; xi += 0.1) {
      for (double y = -10.0; y <= 10.0; y += 0.01) {
        max_value = std::max(max_value, gev_logpdf({0.0, sigma, xi}, y));
      }
    }
  }
  CHECK(std::isfinite(max_value));
  // the density is at most 1 / sigma_min times the mode density of the standard form
  CHECK(max_value < -std::log(0.5) + 1.0);
}

TEST_CASE("analytic gradients match central differences") {
  RandomStream rng(31);
  auto u = [&](double a, double b) { return a + (b - a) * rng.uniform(); };
  constexpr double h = 1e-6;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  for (int k = 0; k < 20; ++k) {
    const Family fams[] = {Family(FamilyKind::gev), Family(FamilyKind::gp), Family(FamilyKind::frechet),
                           Family(FamilyKind::normal)};
    for (const Family& fam : fams) {
      Theta theta{};
      if (fam.kind() == FamilyKind::gev) theta = {u(-1, 1), u(0.5, 2), u(-0.4, 0.4)};
      if (fam.kind() == FamilyKind::gp) theta = {u(0.5, 2), u(-0.4, 0.4), 0};
      if (fam.kind() == FamilyKind::frechet) theta = {u(0.5, 2), u(0.5, 3), 0};
      if (fam.kind() == FamilyKind::normal) theta = {u(-1, 1), u(0.5, 2), 0};
      // an interior y: the median of the distribution
      const double y = fam.quantile(theta, u(0.2, 0.8));
      const Theta g = fam.log_density_gradient(theta, y);
      for (std::size_t d = 0; d < fam.parameter_count(); ++d) {
        Theta up = theta, dn = theta;
        up[d] += h;
        dn[d] -= h;
        const double fd = (fam.log_density(up, y) - fam.log_density(dn, y)) / (2 * h);
        CHECK(rel(g[d], fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("family dispatch agrees with the typed functions") {
  const Family gev(FamilyKind::gev);
  CHECK(gev.log_density({0, 1, 1}, 1) == gev_logpdf({0, 1, 1}, 1));
  CHECK(Family::from_name("gev") == gev);
  CHECK_FALSE(Family::from_name("cauchy").has_value());
  CHECK(gev.valid({0, 1, -1.5}));
  CHECK_FALSE(gev.valid_for_estimation({0, 1, -1.0}));
  CHECK(gev.valid_for_estimation({0, 1, -0.99}));
}

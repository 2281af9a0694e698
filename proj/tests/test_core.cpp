#include "oracles.hpp"

#include "vibronix/errors.hpp"
#include "vibronix/least_squares.hpp"
#include "vibronix/rng.hpp"
#include "vibronix/spectrum.hpp"
#include "vibronix/svg.hpp"
#include "vibronix/units.hpp"

#include <doctest.h>

#include <numeric>

using namespace vibronix;

TEST_CASE("wavelength and energy conversions") {
  CHECK(units::nm_to_ev(547.5) == doctest::Approx(2.26455).epsilon(1e-5));
  CHECK(units::nm_to_ev(1239.8419) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(units::ev_to_nm(units::nm_to_ev(612.3)) == doctest::Approx(612.3).epsilon(1e-14));
  // 0.31 nm at 547.5 nm is 1.28 meV at two-decimal precision.
  CHECK(units::width_nm_to_mev(0.31, 547.5) == doctest::Approx(1.2822).epsilon(1e-4));
  CHECK(units::width_mev_to_nm(units::width_nm_to_mev(0.42, 600.0), 600.0) == doctest::Approx(0.42));
}

TEST_CASE("spring frequency conversion") {
  // hbar sqrt(k/m) for k = 1 eV/A^2, m = 1 amu is 64.654 meV.
  CHECK(units::spring_frequency_mev(1.0) == doctest::Approx(64.654).epsilon(1e-4));
  CHECK(units::spring_frequency_mev(4.0) == doctest::Approx(2.0 * units::spring_frequency_mev(1.0)));
}

TEST_CASE("spectrum validation and grids") {
  const auto g = uniform_grid(1.0, 2.0, 0.25);
  REQUIRE(g.size() == 5);
  CHECK(g.back() == doctest::Approx(2.0));
  Spectrum s;
  s.axis = {1.0, 2.0, 3.0};
  s.intensity = {0.0, 1.0, 2.0};
  CHECK_NOTHROW(s.validate());
  s.intensity[1] = -1.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s.intensity[1] = 1.0;
  s.axis[2] = 2.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  CHECK(parse_axis_kind("energy_ev") == AxisKind::Energy);
  CHECK_THROWS_AS(parse_axis_kind("furlong"), DomainError);
}

TEST_CASE("rng is reproducible and streams differ") {
  Rng a(42, 0), b(42, 0), c(42, 1);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
  }
  CHECK(differs);
}

TEST_CASE("rng variate moments") {
  Rng rng(7);
  const int n = 200000;
  double su = 0, se = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    su += rng.uniform();
    se += rng.exponential(2.0);
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(se / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("poisson and gamma variates match their means and variances") {
  for (double mean : {0.3, 4.0, 37.5, 1e4}) {
    Rng rng(11);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(rng.poisson(mean));
      s += k;
      s2 += k * k;
    }
    const double m = s / n, v = s2 / n - m * m;
    CHECK(m == doctest::Approx(mean).epsilon(5.0 * std::sqrt(mean / n) / mean + 1e-3));
    CHECK(v == doctest::Approx(mean).epsilon(0.03));
  }
  for (double shape : {1.0, 2.5, 40.0}) {
    Rng rng(3);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.gamma(shape, 2.0);
      s += x;
      s2 += x * x;
    }
    const double m = s / n, v = s2 / n - m * m;
    CHECK(m == doctest::Approx(shape / 2.0).epsilon(0.01));
    CHECK(v == doctest::Approx(shape / 4.0).epsilon(0.03));
  }
}

TEST_CASE("levenberg-marquardt recovers an exponential exactly") {
  std::vector<double> t, y;
  for (int i = 0; i < 40; ++i) {
    t.push_back(0.1 * i);
    y.push_back(3.0 * std::exp(-1.7 * t.back()) + 0.2);
  }
  const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd*) {
    r.resize(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) r(static_cast<Eigen::Index>(i)) = p(0) * std::exp(-p(1) * t[i]) + p(2) - y[i];
    return true;
  };
  Eigen::VectorXd p0(3);
  p0 << 1.0, 0.5, 0.0;
  const auto res = levenberg_marquardt(fn, p0);
  REQUIRE(res.converged);
  CHECK(res.params(0) == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(res.params(1) == doctest::Approx(1.7).epsilon(1e-8));
  CHECK(res.params(2) == doctest::Approx(0.2).epsilon(1e-8));
  for (std::size_t i = 1; i < res.accepted_costs.size(); ++i) CHECK(res.accepted_costs[i] <= res.accepted_costs[i - 1]);
}

TEST_CASE("levenberg-marquardt reports non-convergence without throwing") {
  const ResidualFn fn = [](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd*) {
    r.resize(2);
    r << 10.0 * (p(1) - p(0) * p(0)), 1.0 - p(0);
    return true;
  };
  Eigen::VectorXd p0(2);
  p0 << -1.2, 1.0;
  LmOptions opt;
  opt.max_iterations = 3;
  const auto res = levenberg_marquardt(fn, p0, opt);
  CHECK_FALSE(res.converged);
  CHECK(res.iterations <= 3);
  const auto full = levenberg_marquardt(fn, p0);
  CHECK(full.converged);
  CHECK(full.params(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("numeric jacobian agrees with the analytic one") {
  const ResidualFn fn = [](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd*) {
    r.resize(2);
    r << std::sin(p(0)) * p(1), p(0) * p(0) + std::exp(p(1));
    return true;
  };
  Eigen::VectorXd p(2);
  p << 0.3, -0.4;
  const auto j = numeric_jacobian(fn, p, 2);
  CHECK(j(0, 0) == doctest::Approx(std::cos(0.3) * -0.4).epsilon(1e-7));
  CHECK(j(0, 1) == doctest::Approx(std::sin(0.3)).epsilon(1e-7));
  CHECK(j(1, 0) == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(j(1, 1) == doctest::Approx(std::exp(-0.4)).epsilon(1e-7));
}

TEST_CASE("linear least squares matches normal equations") {
  std::vector<double> x = {0, 1, 2, 3, 4, 5}, y = {1.1, 2.9, 5.2, 7.1, 8.8, 11.2};
  Eigen::MatrixXd d(6, 2);
  Eigen::VectorXd yy(6);
  for (int i = 0; i < 6; ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = x[static_cast<std::size_t>(i)];
    yy(i) = y[static_cast<std::size_t>(i)];
  }
  const auto fit = linear_least_squares(d, yy);
  const auto [b0, b1] = oracle::ols(x, y);
  CHECK(fit.beta(0) == doctest::Approx(b0).epsilon(1e-12));
  CHECK(fit.beta(1) == doctest::Approx(b1).epsilon(1e-12));
  CHECK(fit.dof == 4);
}

TEST_CASE("svg output has one group per dataset and escapes text") {
  svg::Plot p{"a < b & c", "x", "y", {}};
  p.series.push_back({"one", {0, 1}, {0, 1}, {}, svg::Style::Line, "#000"});
  p.series.push_back({"two", {0, 1}, {1, 0}, {}, svg::Style::Points, "#f00"});
  p.series.push_back({"band", {0, 1}, {0, 0}, {1, 1}, svg::Style::Band, "#0f0"});
  const std::string s = p.render();
  std::size_t groups = 0;
  for (std::size_t pos = 0; (pos = s.find("class=\"dataset\"", pos)) != std::string::npos; ++pos) ++groups;
  CHECK(groups == 3);
  CHECK(s.find("a &lt; b &amp; c") != std::string::npos);
  CHECK(s.rfind("</svg>") != std::string::npos);
}

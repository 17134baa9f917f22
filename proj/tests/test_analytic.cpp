#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cdw/analytic.hpp"

using namespace cdw;
using namespace cdw::analytic;

namespace {

// Reference integrals use double-exponential quadrature, independent of the
// Gauss-Kronrod panels inside the library.
template <class F>
double integrate_quarter(F f) {
  boost::math::quadrature::tanh_sinh<double> q;
  return q.integrate(f, 0.0, 0.25, 1e-9);
}

// K0 at large x from its asymptotic series, truncated at the smallest term.
double k0_asymptotic(double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 30; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * -(odd * odd) / (8.0 * k * x);
    if (std::abs(next) > std::abs(term)) break;
    term = next;
    sum += term;
  }
  return std::sqrt(M_PI / (2.0 * x)) * std::exp(-x) * sum;
}

}  // namespace

TEST(Phi, SmallU) {
  EXPECT_DOUBLE_EQ(phi(0.0), 1.0 / 12.0);
  EXPECT_NEAR(phi(1e-9), 1.0 / 12.0, 1e-10);
  // series and closed form agree across the switch
  const double below = phi(std::nextafter(1e-2, 0.0));
  const double above = phi(1e-2);
  EXPECT_NEAR(below, above, 1e-7 * above);
}

TEST(Phi, ReferenceValues) {
  EXPECT_NEAR(phi(1.0), 3.0 - 8.0 / std::exp(1.0), 1e-15);
  EXPECT_NEAR(phi(1.0), 0.056964470628461427, 1e-15);
  EXPECT_NEAR(phi(10.0), 0.0065998819601826, 1e-15);
}

TEST(Phi, InverseSquareTail) {
  for (double u : {1e3, 1e4, 1e5}) EXPECT_NEAR(phi(u) * u * u, 1.0, 5.0 / u);
  EXPECT_THROW(phi(-1.0), DomainError);
}

TEST(Phi, MonotoneDecreasing) {
  double last = phi(0.0);
  for (double u = 0.001; u < 200.0; u *= 1.1) {
    const double v = phi(u);
    EXPECT_LT(v, last);
    last = v;
  }
}

TEST(LimitDensity, ZeroUClosedForm) {
  for (double s : {1e-6, 0.01, 0.1, 0.2, 0.2499}) {
    const double r = std::sqrt(1.0 - 4.0 * s);
    // the naive log form loses digits to 1 - r at small s
    const double naive = 2.0 * std::log((1.0 + r) / (1.0 - r));
    EXPECT_NEAR(p_u_density(0.0, s), naive, 1e-10 * naive);
    EXPECT_NEAR(p0_density(s), p_u_density(0.0, s), 1e-12 * naive);
  }
}

TEST(LimitDensity, NormalizedWithMeanPhi) {
  for (double u : {0.0, 1.0, 10.0}) {
    const double mass = integrate_quarter([&](double s) { return p_u_density(u, s); });
    const double mean = integrate_quarter([&](double s) { return s * p_u_density(u, s); });
    EXPECT_NEAR(mass, 1.0, 1e-6) << "u " << u;
    EXPECT_NEAR(mean, phi(u), 1e-6) << "u " << u;
  }
}

TEST(LimitDensity, TabulatedCdf) {
  for (double u : {0.0, 0.5, 2.0, 10.0, 20.0}) {
    const SigmaLimitCdf cdf(u);
    EXPECT_NEAR(cdf.total(), 1.0, 1e-6) << "u " << u;
    EXPECT_EQ(cdf(-1.0), 0.0);
    double last = 0.0;
    for (double s = 0.0; s <= 0.25; s += 0.0025) {
      const double c = cdf(s);
      EXPECT_GE(c, last);
      last = c;
    }
    const double mid = integrate_quarter([&](double s) { return s < 0.05 ? p_u_density(u, s) : 0.0; });
    EXPECT_NEAR(cdf(0.05), mid, 1e-5) << "u " << u;
  }
}

TEST(LimitDensity, DomainChecks) {
  EXPECT_THROW(p_u_density(1.0, 0.0), DomainError);
  EXPECT_THROW(p_u_density(1.0, 0.25), DomainError);
  EXPECT_THROW(p_u_density(-1.0, 0.1), DomainError);
  EXPECT_THROW(SigmaLimitCdf(-0.5), DomainError);
}

// u^-2 p_u(a / u^2) approaches 2 K0(2 sqrt a) at rate 1/u.
TEST(LimitDensity, LargeUApproachesBesselForm) {
  const auto sup_error = [](double u) {
    double worst = 0.0;
    for (double a = 0.25; a <= 8.0; a += 0.05) {
      worst = std::max(worst, std::abs(p_u_density(u, a / (u * u)) / (u * u) - k0_density(a)));
    }
    return worst;
  };
  const double e200 = sup_error(200.0);
  const double e800 = sup_error(800.0);
  EXPECT_NEAR(e200 / e800, 4.0, 0.2);
  EXPECT_LT(sup_error(3200.0), 1e-3);
}

TEST(Bessel, ReferenceValues) {
  const std::vector<std::pair<double, double>> ref = {
      {1e-3, 7.0236888005623813},     {0.1, 2.4270690247020166},      {0.5, 0.92441907122766586},
      {1.0, 0.42102443824070833},     {2.0, 0.11389387274953344},     {3.0, 0.034739504386279248},
      {5.0, 0.0036910983340425943},   {10.0, 1.7780062316167652e-5},  {20.0, 5.7412378153365243e-10},
      {50.0, 3.4101677497894955e-23},
  };
  for (const auto& [x, k] : ref) EXPECT_NEAR(bessel_k0(x) / k, 1.0, 1e-10) << "x " << x;
}

TEST(Bessel, SmallArgumentSeries) {
  const double gamma = 0.57721566490153286;
  for (double x : {1e-6, 1e-4, 1e-3}) {
    const double lead = -std::log(x / 2.0) - gamma;
    const double series = lead + 0.25 * x * x * (lead + 1.0);
    EXPECT_NEAR(bessel_k0(x) / series, 1.0, 1e-10) << "x " << x;
  }
}

TEST(Bessel, LargeArgumentAsymptotics) {
  for (double x : {20.0, 30.0, 60.0}) EXPECT_NEAR(bessel_k0(x) / k0_asymptotic(x), 1.0, 1e-6) << "x " << x;
  // relative to the leading term: -1 / (8 x) + 9 / (128 x^2) + O(x^-3)
  const double lead = std::sqrt(M_PI / 40.0) * std::exp(-20.0);
  EXPECT_NEAR(bessel_k0(20.0) / lead - 1.0, -1.0 / 160.0 + 9.0 / 51200.0, 2e-5);
  EXPECT_THROW(bessel_k0(0.0), DomainError);
}

TEST(Bessel, DensityNormalizationAndCdf) {
  boost::math::quadrature::exp_sinh<double> q;
  EXPECT_NEAR(q.integrate([](double a) { return k0_density(a); }, 0.0, std::numeric_limits<double>::infinity()), 1.0,
              1e-9);
  boost::math::quadrature::tanh_sinh<double> t;
  for (double a : {0.01, 0.3, 1.0, 4.0}) {
    EXPECT_NEAR(k0_cdf(a), t.integrate([](double v) { return k0_density(v); }, 0.0, a), 1e-9) << "a " << a;
  }
  EXPECT_EQ(k0_cdf(0.0), 0.0);
  EXPECT_NEAR(k0_cdf(400.0), 1.0, 1e-15);
}

TEST(Covariance, Bridge) {
  EXPECT_DOUBLE_EQ(bridge_covariance(0.0), 1.0 / 12.0);
  EXPECT_DOUBLE_EQ(bridge_covariance(0.5), -1.0 / 24.0);
  for (double t = 0.0; t <= 1.0; t += 0.05) EXPECT_NEAR(bridge_covariance(t), bridge_covariance(1.0 - t), 1e-15);
  // zero integral over a period
  boost::math::quadrature::tanh_sinh<double> q;
  EXPECT_NEAR(q.integrate([](double t) { return bridge_covariance(t); }, 0.0, 1.0), 0.0, 1e-14);
  EXPECT_THROW(bridge_covariance(1.5), DomainError);
}

TEST(Covariance, Polarization) {
  EXPECT_DOUBLE_EQ(polar_covariance(0.0), 1.0 / 720.0);
  EXPECT_NEAR(polar_covariance(1.0), 1.0 / 720.0, 1e-16);
  // E (G(r) - G(0))^2 = 2 (C(0) - C(r)) ~ r^2 / 12
  for (double r : {1e-2, 1e-3, 1e-4}) {
    EXPECT_NEAR(2.0 * (polar_covariance(0.0) - polar_covariance(r)) / (r * r), 1.0 / 12.0, r);
  }
  EXPECT_THROW(polar_covariance(-0.1), DomainError);
}

#pragma once

// Closed-form and quadrature-evaluated limit curves for the toy model:
// the scaling function of the mean cumulative avalanche size, the limit
// density of the rescaled cumulative size and its large-u Bessel form, and
// the covariances of the limiting strain and polarization processes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "cdw/lattice.hpp"

namespace cdw::analytic {

// The closed form cancels to O(u^4) from O(1) terms; below this use the series.
inline constexpr double kPhiSeriesBelow = 0.5;

// lim L^-2 E[Sigma(u / L)].
inline double phi(double u) {
  if (!(u >= 0.0)) throw DomainError("phi: u must be nonnegative");
  if (u < kPhiSeriesBelow) {
    // sum_{n >= 4} (-1)^n (2n - 6) / n! u^(n-4)
    double sum = 0.0;
    double inv_fact = 1.0 / 24.0;
    double pw = 1.0;
    for (int n = 4; n < 24; ++n) {
      sum += ((n % 2 == 0) ? 1.0 : -1.0) * (2.0 * n - 6.0) * inv_fact * pw;
      inv_fact /= n + 1.0;
      pw *= u;
    }
    return sum;
  }
  const double e = std::exp(-u);
  return (6.0 - 4.0 * u + u * u - 6.0 * e - 2.0 * u * e) / (u * u * u * u);
}

namespace detail {

template <class F>
double integrate(F f, double a, double b) {
  if (!(b > a)) return 0.0;
  // tolerances much below 1e-12 sit under the rule's error floor and force full depth
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

}  // namespace detail

inline double p0_density(double s) {
  if (!(s > 0.0 && s < 0.25)) throw DomainError("p0_density: s must lie in (0, 1/4)");
  const double r = std::sqrt(1.0 - 4.0 * s);
  // (1 + r) / (1 - r) = (1 + r)^2 / (4 s)
  return 4.0 * std::log((1.0 + r) / (2.0 * std::sqrt(s)));
}

// Density of lim Sigma(u / L) / L^2 on (0, 1/4).
//
// u > 0: after t = u z - 2 u sqrt(s) the integrand has the endpoint factor
// 1 / sqrt(t (t + c)), c = 4 u sqrt(s); with t = w^2 and w = sqrt(c) sinh(theta)
// it becomes smooth. u = 0: z = 2 sqrt(s) cosh(theta) in the original form.
inline double p_u_density(double u, double s) {
  if (!(u >= 0.0)) throw DomainError("p_u_density: u must be nonnegative");
  if (!(s > 0.0 && s < 0.25)) throw DomainError("p_u_density: s must lie in (0, 1/4)");
  const double rs = std::sqrt(s);
  if (u == 0.0) {
    const double top = std::acosh(1.0 / (2.0 * rs));
    return 4.0 * top;
  }
  const double c = 4.0 * u * rs;
  // 1 - 2 sqrt(s) without cancellation near s = 1/4
  const double T = u * (1.0 - 4.0 * s) / (1.0 + 2.0 * rs);
  // e^{-w^2} is below 1e-40 past w = 9.6
  const double W = std::min(std::sqrt(T), 9.6);
  const double sc = std::sqrt(c);
  const double top = std::asinh(W / sc);
  const auto f = [&](double th) {
    const double w = sc * std::sinh(th);
    const double t = w * w;
    const double v = T - t;
    return 2.0 * std::exp(-t) * (4.0 + 8.0 * v + 2.0 * v * v);
  };
  return std::exp(-2.0 * u * rs) * detail::integrate(f, 0.0, top);
}

inline double bessel_k0(double x) {
  if (!(x > 0.0)) throw DomainError("bessel_k0: argument must be positive");
  return boost::math::cyl_bessel_k(0, x);
}

inline double bessel_k1(double x) {
  if (!(x > 0.0)) throw DomainError("bessel_k1: argument must be positive");
  return boost::math::cyl_bessel_k(1, x);
}

// Large-u limit density of a = u^2 s.
inline double k0_density(double a) {
  if (!(a > 0.0)) throw DomainError("k0_density: a must be positive");
  return 2.0 * bessel_k0(2.0 * std::sqrt(a));
}

// Integral of k0_density over (0, a].
inline double k0_cdf(double a) {
  if (a <= 0.0) return 0.0;
  const double x = 2.0 * std::sqrt(a);
  return 1.0 - x * bessel_k1(x);
}

// Cumulative distribution of the limit density for fixed u, tabulated on a
// grid uniform in v = 2 sqrt(s) (which absorbs the logarithmic singularity
// at s = 0) and linearly interpolated.
class SigmaLimitCdf {
 public:
  explicit SigmaLimitCdf(double u, std::size_t panels = 2000) : u_(u), cdf_(panels + 1, 0.0) {
    if (!(u >= 0.0)) throw DomainError("SigmaLimitCdf: u must be nonnegative");
    const double h = 1.0 / static_cast<double>(panels);
    for (std::size_t k = 0; k < panels; ++k) {
      const double a = h * static_cast<double>(k);
      const double piece = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
          [&](double v) {
            const double s = 0.25 * v * v;
            if (!(s > 0.0 && s < 0.25)) return 0.0;
            return p_u_density(u_, s) * 0.5 * v;
          },
          a, a + h, 0, 0.0);
      cdf_[k + 1] = cdf_[k] + piece;
    }
  }

  double u() const noexcept { return u_; }
  double total() const noexcept { return cdf_.back(); }

  double operator()(double s) const {
    if (s <= 0.0) return 0.0;
    if (s >= 0.25) return cdf_.back();
    const double v = 2.0 * std::sqrt(s) * static_cast<double>(cdf_.size() - 1);
    const auto k = std::min(static_cast<std::size_t>(v), cdf_.size() - 2);
    const double f = v - static_cast<double>(k);
    return cdf_[k] + f * (cdf_[k + 1] - cdf_[k]);
  }

 private:
  double u_;
  std::vector<double> cdf_;
};

inline double bridge_covariance(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("bridge_covariance: t must lie in [0, 1]");
  return (1.0 - 6.0 * t + 6.0 * t * t) / 12.0;
}

inline double polar_covariance(double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw DomainError("polar_covariance: r must lie in [0, 1]");
  const double r2 = r * r;
  return (1.0 - 30.0 * r2 + 60.0 * r2 * r - 30.0 * r2 * r2) / 720.0;
}

}  // namespace cdw::analytic

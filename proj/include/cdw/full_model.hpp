#pragma once

// The untruncated periodic chain: well coordinates from well numbers, the
// geometric jump response, the forced avalanche and the zero-force avalanche,
// and threshold search by iterating the latter from a flat start.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cdw/lattice.hpp"

namespace cdw::full {

// Tolerance used when comparing well coordinates against a recorded maximum
// or the cusp; jumped sites return to their old value only up to rounding.
inline constexpr double kCoordTolerance = 1e-12;

// w[d] such that ytilde_i = sum_d w[d] * source_{i+d} + F / lambda, where
// source = laplacian(m) + laplacian(alpha).
inline std::vector<double> coordinate_kernel(const ModelParams& p) {
  const std::size_t n = p.L;
  const double eta = p.eta;
  const double pre = eta / (1.0 - eta * eta);
  std::vector<double> w(n);
  if (p.truncated_kernel) {
    for (std::size_t d = 0; d < n; ++d) w[d] = pre * std::pow(eta, static_cast<double>(std::min(d, n - d)));
  } else {
    const double etaL = std::pow(eta, static_cast<double>(n));
    for (std::size_t d = 0; d < n; ++d) {
      w[d] = pre * (std::pow(eta, static_cast<double>(d)) + std::pow(eta, static_cast<double>(n - d))) / (1.0 - etaL);
    }
  }
  return w;
}

// Change of ytilde_{j+d} when particle j jumps one well forward.
inline std::vector<double> jump_kernel(const ModelParams& p) {
  const std::size_t n = p.L;
  std::vector<double> r(n);
  if (p.truncated_kernel) {
    const auto w = coordinate_kernel(p);
    for (std::size_t d = 0; d < n; ++d) r[d] = w[(d + 1) % n] - 2.0 * w[d] + w[(d + n - 1) % n];
    return r;
  }
  const double eta = p.eta;
  const double etaL = std::pow(eta, static_cast<double>(n));
  const double a = (1.0 - eta) / (1.0 + eta);
  r[0] = -2.0 * eta / (1.0 + eta) + a * 2.0 * etaL / (1.0 - etaL);
  for (std::size_t d = 1; d < n; ++d) {
    r[d] = a * (std::pow(eta, static_cast<double>(d)) + std::pow(eta, static_cast<double>(n - d))) / (1.0 - etaL);
  }
  return r;
}

inline RealField well_coords_full(const IntField& m, const Disorder& disorder, const ModelParams& p) {
  const std::size_t n = m.size();
  if (n != disorder.size() || n != p.L) throw InvalidLattice("length mismatch between m, disorder and params");
  const auto lap = periodic_laplacian(m);
  std::vector<double> source(n);
  for (std::size_t i = 0; i < n; ++i) {
    source[i] = static_cast<double>(lap.values()[i]) + disorder.delta_alpha.values()[i];
  }
  const auto w = coordinate_kernel(p);
  RealField y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      const std::size_t k = i + d < n ? i + d : i + d - n;
      acc += w[d] * source[k];
    }
    y[static_cast<Site>(i)] = acc + p.F / p.lambda;
  }
  return y;
}

inline RealField jump_response_full(RealField ytilde, Site j, const ModelParams& p) {
  const auto r = jump_kernel(p);
  const std::size_t n = ytilde.size();
  const std::size_t base = ytilde.wrap(j);
  for (std::size_t d = 0; d < n; ++d) ytilde[static_cast<Site>(base + d)] += r[d];
  return ytilde;
}

struct FullConfig {
  IntField m;
  RealField ytilde;
  double F = 0.0;
};

inline FullConfig make_full_config(IntField m, const Disorder& disorder, const ModelParams& p) {
  auto y = well_coords_full(m, disorder, p);
  return FullConfig{std::move(m), std::move(y), p.F};
}

inline bool is_valid(const FullConfig& c) {
  return std::all_of(c.ytilde.begin(), c.ytilde.end(), [](double y) {
    return y > -0.5 - kCoordTolerance && y <= 0.5 + kCoordTolerance;
  });
}

struct ForcedAvalanche {
  FullConfig config;
  double F_star = 0.0;
  std::size_t jumps = 0;
};

struct ZfaOutcome {
  FullConfig config;
  std::size_t jumps = 0;
};

namespace detail {

inline std::size_t argmax(const RealField& y) {
  return static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
}

// Jumps `first`, then keeps jumping the current argmax while it exceeds cutoff.
inline std::size_t cascade(FullConfig& c, std::size_t first, double cutoff, const std::vector<double>& response) {
  const std::size_t n = c.m.size();
  std::vector<char> jumped(n, 0);
  std::size_t count = 0;
  std::size_t j = first;
  for (;;) {
    if (jumped[j] || count == n) {
      throw SlidingDetected("site " + std::to_string(j) + " would jump twice in one avalanche");
    }
    jumped[j] = 1;
    ++count;
    c.m[static_cast<Site>(j)] += 1;
    for (std::size_t d = 0; d < n; ++d) c.ytilde[static_cast<Site>(j + d)] += response[d];
    j = argmax(c.ytilde);
    if (!(c.ytilde.values()[j] > cutoff + kCoordTolerance)) break;
  }
  return count;
}

}  // namespace detail

// Raises the force until one particle reaches its cusp, then relaxes. The
// result is valid at F_star = F + lambda (1/2 - max ytilde).
inline ForcedAvalanche avalanche_with_force(FullConfig cfg, const Disorder& disorder, const ModelParams& p) {
  if (cfg.m.size() != disorder.size() || cfg.m.size() != p.L) throw InvalidLattice("length mismatch");
  const bool was_valid = is_valid(cfg);
  const std::size_t top = detail::argmax(cfg.ytilde);
  const double shift = 0.5 - cfg.ytilde.values()[top];
  for (auto& y : cfg.ytilde) y += shift;
  const double F_old = cfg.F;
  cfg.F = F_old + p.lambda * shift;
  const auto response = jump_kernel(p);
  const std::size_t jumps = detail::cascade(cfg, top, 0.5, response);

  if (was_valid && p.eta < 1.0 / 3.0 && F_old >= 0.0) {
    const double floor = -0.5 + (cfg.F - F_old) / p.lambda;
    for (double y : cfg.ytilde) {
      if (!(y > floor - kCoordTolerance)) throw InternalError("bottom-edge bound violated after forced avalanche");
    }
  }
  const double F_star = cfg.F;
  return ForcedAvalanche{std::move(cfg), F_star, jumps};
}

// One zero-force avalanche: record the maximum, jump the argmax, and cascade
// while any coordinate exceeds the recorded maximum.
inline ZfaOutcome zfa_full(FullConfig cfg, const Disorder& disorder, const ModelParams& p) {
  if (cfg.m.size() != disorder.size() || cfg.m.size() != p.L) throw InvalidLattice("length mismatch");
  const std::size_t top = detail::argmax(cfg.ytilde);
  const double cutoff = cfg.ytilde.values()[top];
  const auto response = jump_kernel(p);
  const std::size_t jumps = detail::cascade(cfg, top, cutoff, response);
  return ZfaOutcome{std::move(cfg), jumps};
}

struct FullThreshold {
  IntField m_plus;
  double F_th = 0.0;
  std::size_t zfa_applications = 0;
};

// Iterates the zero-force avalanche from m = 0 until it maps m to m + 1.
inline FullThreshold threshold_full(const Disorder& disorder, const ModelParams& params,
                                    std::size_t max_applications = 10'000'000) {
  ModelParams p = params;
  p.F = 0.0;
  IntField m(p.L, 0);
  for (std::size_t applications = 0; applications < max_applications; ++applications) {
    auto out = zfa_full(make_full_config(m, disorder, p), disorder, p);
    if (out.config.m == plus_constant(m, 1)) {
      auto m_plus = min_normalized(std::move(m));
      const auto y = well_coords_full(m_plus, disorder, p);
      const double y_max = *std::max_element(y.begin(), y.end());
      return FullThreshold{std::move(m_plus), p.lambda * (0.5 - y_max), applications + 1};
    }
    m = std::move(out.config.m);
  }
  throw IterationCapExceeded("threshold_full: zero-force avalanche did not reach the fixed family");
}

}  // namespace cdw::full

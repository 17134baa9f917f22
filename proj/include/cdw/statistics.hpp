#pragma once

// Monte Carlo estimators over independent disorder realizations and the
// hypothesis tests that compare them with the limit curves. Every estimator
// is a deterministic function of (parameters, master seed): realization r
// uses the stream stream_seed(seed, r), and reductions run in index order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "cdw/analytic.hpp"
#include "cdw/lattice.hpp"
#include "cdw/parallel.hpp"
#include "cdw/toy_model.hpp"

namespace cdw::stats {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline MeanSe mean_se(const std::vector<double>& x) {
  MeanSe r;
  r.n = x.size();
  if (x.empty()) return r;
  r.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  if (x.size() < 2) return r;
  double ss = 0.0;
  for (double v : x) ss += (v - r.mean) * (v - r.mean);
  const double var = ss / static_cast<double>(x.size() - 1);
  r.se = std::sqrt(var / static_cast<double>(x.size()));
  return r;
}

// Sample variance with the standard error of the variance estimate
// (from the fourth central moment).
inline MeanSe variance_se(const std::vector<double>& x) {
  MeanSe r;
  r.n = x.size();
  if (x.size() < 2) return r;
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    const double d2 = (v - mean) * (v - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  r.mean = m2 * n / (n - 1.0);
  r.se = std::sqrt(std::max(0.0, (m4 - m2 * m2) / n));
  return r;
}

// Empirical distribution over a sample.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> samples) : x_(std::move(samples)) { std::sort(x_.begin(), x_.end()); }

  std::size_t size() const noexcept { return x_.size(); }
  const std::vector<double>& sorted() const noexcept { return x_; }

  double operator()(double t) const {
    if (x_.empty()) return 0.0;
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    return static_cast<double>(it - x_.begin()) / static_cast<double>(x_.size());
  }

 private:
  std::vector<double> x_;
};

// sup |F_n - F| for a continuous reference F, checking both sides of each jump.
inline double ks_statistic(const Ecdf& e, const std::function<double(double)>& cdf) {
  const auto& x = e.sorted();
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i + 1 < x.size() && x[i + 1] == x[i]) continue;
    const double f = cdf(x[i]);
    const auto lo = static_cast<double>(std::lower_bound(x.begin(), x.end(), x[i]) - x.begin());
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - lo / n)});
  }
  return d;
}

inline double ks_two_sample(const Ecdf& a, const Ecdf& b) {
  double d = 0.0;
  for (const auto* e : {&a, &b}) {
    for (double t : e->sorted()) d = std::max(d, std::abs(a(t) - b(t)));
  }
  return d;
}

struct ChiSquare {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

inline ChiSquare chi_square_uniform(const std::vector<std::int64_t>& counts) {
  ChiSquare r;
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
  const double expected = total / static_cast<double>(counts.size());
  for (auto c : counts) r.statistic += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  r.dof = static_cast<double>(counts.size() - 1);
  r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.dof), r.statistic));
  return r;
}

// Pearson test of independence for a contingency table (rows x cols).
inline ChiSquare chi_square_independence(const std::vector<std::vector<std::int64_t>>& table) {
  ChiSquare r;
  const std::size_t R = table.size();
  const std::size_t C = table.front().size();
  std::vector<double> row(R, 0.0);
  std::vector<double> col(C, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      row[i] += static_cast<double>(table[i][j]);
      col[j] += static_cast<double>(table[i][j]);
      total += static_cast<double>(table[i][j]);
    }
  }
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double e = row[i] * col[j] / total;
      if (e > 0.0) r.statistic += (static_cast<double>(table[i][j]) - e) * (static_cast<double>(table[i][j]) - e) / e;
    }
  }
  r.dof = static_cast<double>((R - 1) * (C - 1));
  r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.dof), r.statistic));
  return r;
}

// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0.0;
  double sy = 0.0;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

inline Disorder realization(std::uint64_t seed, std::size_t index, std::size_t L) {
  return gen_disorder(stream_seed(seed, index), L);
}

struct CampaignParams {
  std::size_t L = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// Sigma(u / L) / L^2 for every u in the grid and every realization of a
// threshold-to-threshold campaign.
struct SigmaSamples {
  std::size_t L = 0;
  std::vector<double> u_grid;
  std::vector<std::vector<double>> scaled;  // [u index][realization]
  std::vector<double> event_counts;
};

inline SigmaSamples sigma_samples(const CampaignParams& c, const std::vector<double>& u_grid) {
  struct One {
    std::vector<double> s;
    double events = 0.0;
  };
  const double L = static_cast<double>(c.L);
  auto runs = parallel_map(c.n, c.workers, [&](std::size_t r) {
    const auto trace = toy::t2t_events(realization(c.seed, r, c.L));
    One one;
    one.events = static_cast<double>(trace.events.size());
    for (double u : u_grid) one.s.push_back(static_cast<double>(toy::observables_at(trace, u / L).Sigma) / (L * L));
    return one;
  });
  SigmaSamples out{c.L, u_grid, std::vector<std::vector<double>>(u_grid.size()), {}};
  for (auto& one : runs) {
    for (std::size_t k = 0; k < u_grid.size(); ++k) out.scaled[k].push_back(one.s[k]);
    out.event_counts.push_back(one.events);
  }
  return out;
}

struct SigmaRow {
  std::size_t L = 0;
  double u = 0.0;
  double mean = 0.0;  // E[Sigma(u / L)] / L^2
  double se = 0.0;
  std::size_t n = 0;
  double phi = 0.0;
};

inline std::vector<SigmaRow> summarize_sigma(const SigmaSamples& s) {
  std::vector<SigmaRow> rows;
  for (std::size_t k = 0; k < s.u_grid.size(); ++k) {
    const auto ms = mean_se(s.scaled[k]);
    rows.push_back({s.L, s.u_grid[k], ms.mean, ms.se, ms.n, analytic::phi(s.u_grid[k])});
  }
  return rows;
}

inline std::vector<SigmaRow> estimate_sigma_scaling(const CampaignParams& c, const std::vector<double>& u_grid) {
  return summarize_sigma(sigma_samples(c, u_grid));
}

// P(u / L) for a flat-start campaign at one L.
struct FlatSamples {
  std::size_t L = 0;
  std::vector<double> u_grid;
  std::vector<std::vector<double>> P;  // [u index][realization]
  std::vector<double> event_counts;
};

inline FlatSamples flat_samples(const CampaignParams& c, const std::vector<double>& u_grid) {
  struct One {
    std::vector<double> P;
    double events = 0.0;
  };
  const double L = static_cast<double>(c.L);
  auto runs = parallel_map(c.n, c.workers, [&](std::size_t r) {
    const auto evo = toy::flat_evolve(realization(c.seed, r, c.L));
    One one;
    one.events = static_cast<double>(evo.trace.events.size());
    for (double u : u_grid) {
      const auto ob = toy::observables_at(evo.trace, u / L);
      one.P.push_back(ob.P);
    }
    return one;
  });
  FlatSamples out{c.L, u_grid, std::vector<std::vector<double>>(u_grid.size()), {}};
  for (auto& one : runs) {
    for (std::size_t k = 0; k < u_grid.size(); ++k) out.P[k].push_back(one.P[k]);
    out.event_counts.push_back(one.events);
  }
  return out;
}

struct FlatRow {
  std::size_t L = 0;
  double u = 0.0;
  double mean_P = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  double collapse_x = 0.0;  // X L^{1/2}
  double collapse_y = 0.0;  // E[P] L^{-3/2}
};

inline std::vector<FlatRow> summarize_flat(const FlatSamples& s) {
  std::vector<FlatRow> rows;
  const double L = static_cast<double>(s.L);
  for (std::size_t k = 0; k < s.u_grid.size(); ++k) {
    const auto ms = mean_se(s.P[k]);
    rows.push_back({s.L, s.u_grid[k], ms.mean, ms.se, ms.n, s.u_grid[k] / std::sqrt(L), ms.mean / std::pow(L, 1.5)});
  }
  return rows;
}

inline std::vector<FlatRow> estimate_flat_scaling(const std::vector<std::size_t>& L_grid, const std::vector<double>& u_grid,
                                                  std::size_t n, std::uint64_t seed, std::size_t workers) {
  std::vector<FlatRow> rows;
  for (std::size_t L : L_grid) {
    auto part = summarize_flat(flat_samples({L, n, seed, workers}, u_grid));
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

// A single named check with its statistic and acceptance threshold.
struct TestResult {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string detail;
};

struct CltReport {
  MeanSe variance;          // of S / sqrt(L)
  double ks_normal = 0.0;   // vs N(0, 1/12), continuity-corrected
  bool defect_rule = true;  // threshold defect count (with multiplicity) is |S| or |S| + 2
  double mean_defects_over_sqrt_L = 0.0;
};

inline CltReport test_S_clt(const CampaignParams& c) {
  struct One {
    std::int64_t S = 0;
    std::int64_t defects = 0;
  };
  auto runs = parallel_map(c.n, c.workers, [&](std::size_t r) {
    const auto d = realization(c.seed, r, c.L);
    const auto plus = toy::positive_threshold(d);
    One one;
    one.S = d.S;
    const auto lap = periodic_laplacian(plus.m);
    for (std::size_t i = 0; i < d.size(); ++i) {
      one.defects += std::abs(lap.values()[i] + d.rounded.values()[i]);
    }
    return one;
  });
  CltReport rep;
  const double rootL = std::sqrt(static_cast<double>(c.L));
  std::vector<double> x;
  double defects = 0.0;
  for (const auto& one : runs) {
    x.push_back(static_cast<double>(one.S) / rootL);
    const std::int64_t a = std::abs(one.S);
    if (one.defects != a && one.defects != a + 2) rep.defect_rule = false;
    defects += static_cast<double>(one.defects);
  }
  rep.variance = variance_se(x);
  rep.mean_defects_over_sqrt_L = defects / static_cast<double>(runs.size()) / rootL;
  // S is integer: compare P(S <= k) with the normal cdf at k + 1/2, only at
  // lattice points (the two-sided continuous statistic would see every jump)
  const boost::math::normal_distribution<double> ref(0.0, std::sqrt(1.0 / 12.0));
  const Ecdf e(x);
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  for (const auto& one : runs) {
    lo = std::min(lo, one.S);
    hi = std::max(hi, one.S);
  }
  for (std::int64_t k = lo - 1; k <= hi; ++k) {
    const double t = static_cast<double>(k) / rootL;
    rep.ks_normal = std::max(rep.ks_normal, std::abs(e(t) - boost::math::cdf(ref, t + 0.5 / rootL)));
  }
  return rep;
}

struct ExchangeabilityReport {
  std::vector<std::size_t> lags;
  std::vector<MeanSe> pair_moment;  // E[z_i z_{i+lag}] averaged over i
  MeanSe pooled;                    // mean over the listed lags
  std::vector<std::size_t> sites;
  std::vector<MeanSe> site_mean;
  std::vector<MeanSe> site_second;
  double omega_ks = 0.0;            // omega_0 vs uniform(-1/2, 1/2)
  bool lags_flat = false;
  bool sites_flat = false;
};

inline ExchangeabilityReport test_exchangeability(const CampaignParams& c) {
  const std::size_t L = c.L;
  ExchangeabilityReport rep;
  rep.lags = {1, 2, 3, L / 4, L / 2};
  rep.sites = {0, 1, L / 4, L / 2, L - 1};
  struct One {
    std::vector<double> pair;
    std::vector<double> z;
    double omega0 = 0.0;
  };
  auto runs = parallel_map(c.n, c.workers, [&](std::size_t r) {
    const auto d = realization(c.seed, r, L);
    const auto plus = toy::positive_threshold(d);
    One one;
    for (std::size_t lag : rep.lags) {
      double acc = 0.0;
      for (std::size_t i = 0; i < L; ++i) acc += plus.z.values()[i] * plus.z.values()[(i + lag) % L];
      one.pair.push_back(acc / static_cast<double>(L));
    }
    for (std::size_t s : rep.sites) one.z.push_back(plus.z.values()[s]);
    one.omega0 = d.omega.values()[0];
    return one;
  });
  std::vector<double> all;
  for (std::size_t k = 0; k < rep.lags.size(); ++k) {
    std::vector<double> v;
    for (const auto& one : runs) v.push_back(one.pair[k]);
    rep.pair_moment.push_back(mean_se(v));
    all.insert(all.end(), v.begin(), v.end());
  }
  rep.pooled = mean_se(all);
  rep.lags_flat = std::all_of(rep.pair_moment.begin(), rep.pair_moment.end(),
                              [&](const MeanSe& m) { return std::abs(m.mean - rep.pooled.mean) <= 3.0 * m.se; });
  std::vector<double> mean_all;
  std::vector<double> second_all;
  for (std::size_t k = 0; k < rep.sites.size(); ++k) {
    std::vector<double> v;
    std::vector<double> v2;
    for (const auto& one : runs) {
      v.push_back(one.z[k]);
      v2.push_back(one.z[k] * one.z[k]);
    }
    rep.site_mean.push_back(mean_se(v));
    rep.site_second.push_back(mean_se(v2));
    mean_all.insert(mean_all.end(), v.begin(), v.end());
    second_all.insert(second_all.end(), v2.begin(), v2.end());
  }
  const double m1 = mean_se(mean_all).mean;
  const double m2 = mean_se(second_all).mean;
  rep.sites_flat = true;
  for (std::size_t k = 0; k < rep.sites.size(); ++k) {
    if (std::abs(rep.site_mean[k].mean - m1) > 3.0 * rep.site_mean[k].se) rep.sites_flat = false;
    if (std::abs(rep.site_second[k].mean - m2) > 3.0 * rep.site_second[k].se) rep.sites_flat = false;
  }
  std::vector<double> om;
  for (const auto& one : runs) om.push_back(one.omega0);
  rep.omega_ks = ks_statistic(Ecdf(om), [](double t) { return std::clamp(t + 0.5, 0.0, 1.0); });
  return rep;
}

// Spacing between the two defects of the "one up, one down" perturbation:
// d = sum_i i (round(lap alpha)_i - J'_i) mod L, with J' the threshold
// correction without its extra unit.
inline std::size_t defect_spacing(const Disorder& d) {
  const std::size_t n = d.size();
  const auto L = static_cast<std::int64_t>(n);
  std::vector<std::int64_t> Jp(n, 0);
  if (d.S > 0) {
    for (std::int64_t r = 0; r < d.S; ++r) Jp[d.sigma[static_cast<std::size_t>(r)]] = 1;
  } else if (d.S < 0) {
    for (std::size_t r = n - static_cast<std::size_t>(-d.S); r < n; ++r) Jp[d.sigma[r]] = -1;
  }
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc = (acc + static_cast<std::int64_t>(i) * (d.rounded.values()[i] - Jp[i])) % L;
  }
  return static_cast<std::size_t>((acc % L + L) % L);
}

struct UniformityReport {
  ChiSquare spacing;           // d over {0..L-1}
  ChiSquare independence;      // d bins x max-omega bins
  ChiSquare k_difference;      // (k+ - k-) mod L, recorded only
};

inline UniformityReport test_d_uniform(const CampaignParams& c, std::size_t d_bins = 4, std::size_t omega_bins = 4) {
  const std::size_t L = c.L;
  struct One {
    std::size_t d = 0;
    std::size_t kdiff = 0;
    double max_omega = 0.0;
  };
  auto runs = parallel_map(c.n, c.workers, [&](std::size_t r) {
    const auto dis = realization(c.seed, r, L);
    One one;
    one.d = defect_spacing(dis);
    one.kdiff = (toy::positive_index(dis) + L - toy::negative_index(dis)) % L;
    one.max_omega = dis.omega.values()[dis.sigma.back()];
    return one;
  });
  std::vector<std::int64_t> counts(L, 0);
  std::vector<std::int64_t> kcounts(L, 0);
  std::vector<double> mo;
  for (const auto& one : runs) {
    ++counts[one.d];
    ++kcounts[one.kdiff];
    mo.push_back(one.max_omega);
  }
  std::sort(mo.begin(), mo.end());
  std::vector<double> cuts;
  for (std::size_t b = 1; b < omega_bins; ++b) cuts.push_back(mo[b * mo.size() / omega_bins]);
  std::vector<std::vector<std::int64_t>> table(d_bins, std::vector<std::int64_t>(omega_bins, 0));
  for (const auto& one : runs) {
    const std::size_t row = one.d * d_bins / L;
    const auto col = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), one.max_omega) - cuts.begin());
    ++table[row][col];
  }
  return UniformityReport{chi_square_uniform(counts), chi_square_independence(table), chi_square_uniform(kcounts)};
}

struct BridgeReport {
  std::vector<double> t;
  std::vector<MeanSe> cov;
  std::vector<double> expected;
  bool strains_sum_to_zero = true;
};

// Empirical covariance of the rescaled threshold strains sqrt(12 / L) s_i at
// lags round(t L), averaged over sites within each realization.
inline BridgeReport strain_bridge_check(const CampaignParams& c, const std::vector<double>& t_grid) {
  const std::size_t L = c.L;
  struct One {
    std::vector<double> cov;
    bool zero_sum = true;
  };
  auto runs = parallel_map(c.n, c.workers, [&](std::size_t r) {
    const auto d = realization(c.seed, r, L);
    const auto m = toy::positive_threshold(d).m;
    std::vector<double> s(L);
    std::int64_t total = 0;
    const double scale = std::sqrt(12.0 / static_cast<double>(L));
    for (std::size_t i = 0; i < L; ++i) {
      const std::int64_t si = m[static_cast<Site>(i + 1)] - m[static_cast<Site>(i)];
      total += si;
      s[i] = scale * static_cast<double>(si);
    }
    One one;
    one.zero_sum = total == 0;
    for (double t : t_grid) {
      const auto lag = static_cast<std::size_t>(std::llround(t * static_cast<double>(L))) % L;
      double acc = 0.0;
      for (std::size_t i = 0; i < L; ++i) acc += s[i] * s[(i + lag) % L];
      one.cov.push_back(acc / static_cast<double>(L));
    }
    return one;
  });
  BridgeReport rep;
  rep.t = t_grid;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    std::vector<double> v;
    for (const auto& one : runs) v.push_back(one.cov[k]);
    rep.cov.push_back(mean_se(v));
    rep.expected.push_back(analytic::bridge_covariance(t_grid[k]));
  }
  for (const auto& one : runs) rep.strains_sum_to_zero = rep.strains_sum_to_zero && one.zero_sum;
  return rep;
}

// Threshold force statistics at fixed lambda; recorded, not asserted.
struct ForceReport {
  MeanSe F_th;
  double limit_mean = 0.0;  // lambda / 2 (1 - eta)
  MeanSe variance;
  double L_times_variance = 0.0;
  double L2_times_variance = 0.0;
};

inline ForceReport measure_threshold_force(const CampaignParams& c, double lambda) {
  const auto params = ModelParams::make(c.L, lambda);
  auto f = parallel_map(c.n, c.workers, [&](std::size_t r) {
    return toy::threshold_max_and_force(realization(c.seed, r, c.L), params).F_th;
  });
  ForceReport rep;
  rep.F_th = mean_se(f);
  rep.limit_mean = 0.5 * lambda * (1.0 - params.eta);
  rep.variance = variance_se(f);
  const double L = static_cast<double>(c.L);
  rep.L_times_variance = L * rep.variance.mean;
  rep.L2_times_variance = L * L * rep.variance.mean;
  return rep;
}

}  // namespace cdw::stats

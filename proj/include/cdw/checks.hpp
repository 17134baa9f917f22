#pragma once

// Exact property checks shared by the CLI test suite and the acceptance run.
// Each returns a TestResult whose statistic is a violation count (or a
// maximum deviation) and whose threshold is the largest allowed value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cdw/full_model.hpp"
#include "cdw/lattice.hpp"
#include "cdw/oracle.hpp"
#include "cdw/statistics.hpp"
#include "cdw/toy_model.hpp"

namespace cdw::checks {

using stats::TestResult;

inline TestResult count_result(std::string name, std::size_t failures, std::size_t cases, std::string extra = {}) {
  TestResult r;
  r.name = std::move(name);
  r.statistic = static_cast<double>(failures);
  r.threshold = 0.0;
  r.pass = failures == 0 && cases > 0;
  r.detail = std::to_string(failures) + " of " + std::to_string(cases) + " cases failed" + extra;
  return r;
}

namespace detail {

inline bool leq(const IntField& a, const IntField& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.values()[i] > b.values()[i]) return false;
  }
  return true;
}

inline double max_of(const RealField& y) { return *std::max_element(y.begin(), y.end()); }

inline std::vector<double> zeta_of(const Disorder& d) {
  const auto J = toy::negative_threshold(d).J;
  std::vector<double> zeta(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) zeta[i] = d.omega.values()[i] + static_cast<double>(J.values()[i]);
  return zeta;
}

// Offsets from k of the running minima of zeta walking in direction dir,
// stopping at the first of the two smallest values.
inline std::vector<Site> lower_records(const std::vector<double>& zeta, std::size_t k, int dir) {
  const auto n = static_cast<Site>(zeta.size());
  std::vector<double> sorted = zeta;
  std::sort(sorted.begin(), sorted.end());
  double best = zeta[k];
  std::vector<Site> out;
  for (Site off = dir;; off += dir) {
    const auto s = static_cast<std::size_t>(((static_cast<Site>(k) + off) % n + n) % n);
    if (zeta[s] < best) {
      best = zeta[s];
      out.push_back(off);
    }
    if (zeta[s] <= sorted[1]) break;
  }
  return out;
}

inline std::vector<IntField> zfa_orbit_toy(const Disorder& d, std::size_t limit) {
  std::vector<IntField> out;
  auto cfg = toy::make_toy_config(IntField(d.size(), 0), d);
  while (out.size() < limit) {
    auto r = toy::zfa_toy(cfg, d);
    if (r.jumped.size() == d.size()) break;
    out.push_back(cfg.m);
    cfg = std::move(r.config);
  }
  return out;
}

inline std::vector<IntField> zfa_orbit_full(const Disorder& d, const ModelParams& p, std::size_t limit) {
  std::vector<IntField> out{IntField(p.L, 0)};
  while (out.size() < limit) {
    auto next = full::zfa_full(full::make_full_config(out.back(), d, p), d, p).config.m;
    if (next == plus_constant(out.back(), 1)) break;
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace detail

// Random toy jumps at L = 64: sum of z stays 0 and z - omega stays integral.
// `corrupt` swaps in an update that forgets the left neighbour.
inline std::vector<TestResult> conservation(std::size_t jumps, std::uint64_t seed, bool corrupt = false) {
  const std::size_t L = 64;
  const auto d = gen_disorder(seed, L);
  auto c = toy::make_toy_config(IntField(L, 0), d);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Site> site(0, static_cast<Site>(L) - 1);
  double worst_sum = 0.0;
  double worst_frac = 0.0;
  std::size_t checkpoints = 0;
  for (std::size_t t = 0; t < jumps; ++t) {
    const Site j = site(rng);
    if (corrupt) {
      c.m[j] += 1;
      c.z[j] -= 2.0;
      c.z[j + 1] += 1.0;
    } else {
      c = toy::toy_jump(std::move(c), j);
    }
    if (t % 100 != 99 && t + 1 != jumps) continue;
    ++checkpoints;
    double total = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      total += c.z.values()[i];
      const double k = c.z.values()[i] - d.omega.values()[i];
      worst_frac = std::max(worst_frac, std::abs(k - std::round(k)));
    }
    worst_sum = std::max(worst_sum, std::abs(total));
  }
  const std::string detail = std::to_string(jumps) + " jumps, " + std::to_string(checkpoints) + " checkpoints";
  return {TestResult{"sum_conservation", worst_sum, 1e-9, worst_sum <= 1e-9, "max |sum z|; " + detail},
          TestResult{"fractional_part_conservation", worst_frac, 1e-9, worst_frac <= 1e-9,
                     "max distance of z - omega from an integer; " + detail}};
}

// Thresholds from the closed construction against exhaustive min-max search.
inline TestResult oracle_equivalence(std::size_t count, std::uint64_t seed) {
  std::size_t bad = 0;
  for (std::size_t r = 0; r < count; ++r) {
    const auto d = stats::realization(seed, r, 4 + r % 5);
    const auto b = oracle::brute_threshold(d, 3);
    if (b.m_plus != toy::positive_threshold(d).m || b.m_minus != toy::negative_threshold(d).m) ++bad;
  }
  return count_result("oracle_equivalence", bad, count);
}

inline TestResult fixed_family_toy(std::size_t count, std::size_t L, std::uint64_t seed) {
  std::size_t bad = 0;
  for (std::size_t r = 0; r < count; ++r) {
    const auto d = stats::realization(seed, r, L);
    const auto m = toy::positive_threshold(d).m;
    if (toy::zfa_toy(toy::make_toy_config(m, d), d).config.m != plus_constant(m, 1)) ++bad;
  }
  return count_result("fixed_family_toy", bad, count);
}

// The full threshold is checked with the naive ZFA oracle, not the engine
// that found it.
inline TestResult fixed_family_full(std::size_t count, std::size_t L, double lambda, std::uint64_t seed) {
  const auto p = ModelParams::make(L, lambda);
  std::size_t bad = 0;
  for (std::size_t r = 0; r < count; ++r) {
    const auto d = stats::realization(seed, r, L);
    const auto m = full::threshold_full(d, p).m_plus;
    if (oracle::naive_zfa_full(m, d, p) != plus_constant(m, 1)) ++bad;
  }
  return count_result("fixed_family_full", bad, count);
}

// One closed-form avalanche against its ZFA waves applied one by one, on
// configurations from zero-force orbits and random fields.
inline TestResult wave_aggregation(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t bad = 0;
  std::size_t checked = 0;
  for (std::size_t trial = 0; checked < count; ++trial) {
    const std::size_t L = 4 + trial % 60;
    const auto d = stats::realization(seed, trial, L);
    auto pool = detail::zfa_orbit_toy(d, 8);
    std::uniform_int_distribution<int> h(-1, 1);
    for (int k = 0; k < 2; ++k) {
      IntField m(L);
      for (auto& v : m) v = h(rng);
      pool.push_back(std::move(m));
    }
    for (const auto& m : pool) {
      if (checked == count) break;
      const auto c = toy::make_toy_config(m, d);
      toy::AggregateResult agg;
      try {
        agg = toy::avalanche_aggregate(c, d);
      } catch (const NoExtentError&) {
        continue;
      }
      const auto i = static_cast<Site>(agg.event.init_site);
      const Site waves = std::min(i - agg.event.i_L, agg.event.i_R - i);
      auto seq = c;
      std::int64_t jumps = 0;
      for (Site w = 0; w < waves; ++w) {
        auto r = toy::zfa_toy(seq, d);
        jumps += static_cast<std::int64_t>(r.jumped.size());
        seq = std::move(r.config);
      }
      if (agg.config.m != seq.m || agg.config.z != seq.z || agg.event.size != jumps) ++bad;
      ++checked;
    }
  }
  return count_result("wave_aggregation", bad, checked);
}

// Forced avalanches of the full model at eta < 1/3: each site jumps at most
// once, and every coordinate stays above -1/2 + (F* - F) / lambda.
inline std::vector<TestResult> forced_avalanche_bounds(std::size_t count, std::uint64_t seed) {
  std::size_t bad_once = 0;
  std::size_t bad_floor = 0;
  std::size_t checked = 0;
  for (std::size_t trial = 0; checked < count; ++trial) {
    const std::size_t L = 6 + trial % 25;
    const auto p = ModelParams::make(L, 2.0 + static_cast<double>(trial % 9));
    const auto d = stats::realization(seed, trial, L);
    auto cfg = full::make_full_config(IntField(L, 0), d, p);
    for (int step = 0; step < 40 && checked < count; ++step) {
      const double F_old = cfg.F;
      full::ForcedAvalanche out;
      try {
        out = full::avalanche_with_force(cfg, d, p);
      } catch (const SlidingDetected&) {
        ++bad_once;
        ++checked;
        break;
      } catch (const InternalError&) {
        ++bad_floor;
        ++checked;
        break;
      }
      ++checked;
      for (std::size_t i = 0; i < L; ++i) {
        const auto dm = out.config.m.values()[i] - cfg.m.values()[i];
        if (dm != 0 && dm != 1) {
          ++bad_once;
          break;
        }
      }
      const double floor = -0.5 + (out.F_star - F_old) / p.lambda;
      for (double y : out.config.ytilde) {
        if (!(y > floor - 1e-9)) {
          ++bad_floor;
          break;
        }
      }
      if (out.jumps == L) break;
      cfg = out.config;
    }
  }
  return {count_result("jump_once", bad_once, checked), count_result("bottom_edge_bound", bad_floor, checked)};
}

// Ordering clauses of the zero-force avalanche on ordered pairs m1 <= m2.
inline TestResult noncrossing(std::size_t pairs_wanted, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t pairs = 0;
  std::size_t bad = 0;
  std::size_t clause[3] = {0, 0, 0};
  for (std::size_t trial = 0; pairs < pairs_wanted; ++trial) {
    const std::size_t L = 6 + trial % 27;
    const auto p = ModelParams::make(L, 1.0 + static_cast<double>(trial % 10));
    const auto d = stats::realization(seed, trial, L);
    const auto orbit = detail::zfa_orbit_full(d, p, 30);
    for (int k = 0; k < 20 && pairs < pairs_wanted; ++k) {
      std::uniform_int_distribution<std::size_t> pick(0, orbit.size() - 1);
      std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      if (a > b) std::swap(a, b);
      const IntField& m1 = orbit[a];
      IntField m2 = orbit[b];
      if (k % 4 == 1) m2 = plus_constant(m1, 1);
      if (k % 4 == 2) {
        for (auto& v : m2) v += std::bernoulli_distribution(0.3)(rng) ? 1 : 0;
      }
      if (!detail::leq(m1, m2)) continue;
      const auto c1 = full::make_full_config(m1, d, p);
      const auto c2 = full::make_full_config(m2, d, p);
      full::ZfaOutcome o1;
      full::ZfaOutcome o2;
      try {
        o1 = full::zfa_full(c1, d, p);
        o2 = full::zfa_full(c2, d, p);
      } catch (const SlidingDetected&) {
        continue;
      }
      ++pairs;
      const double y1 = detail::max_of(c1.ytilde);
      const double y2 = detail::max_of(c2.ytilde);
      const auto j = static_cast<std::size_t>(std::max_element(c1.ytilde.begin(), c1.ytilde.end()) - c1.ytilde.begin());
      bool ok = true;
      if (y1 > y2 + 1e-12) {
        ++clause[0];
        ok = ok && detail::leq(o1.config.m, m2);
      }
      if (std::abs(y1 - y2) <= 1e-12 && m1.values()[j] < m2.values()[j]) {
        ++clause[1];
        ok = ok && detail::leq(o1.config.m, m2);
      }
      if (y1 >= y2 - 1e-12) {
        ++clause[2];
        ok = ok && detail::leq(o1.config.m, o2.config.m);
      }
      if (!ok) ++bad;
    }
  }
  return count_result("noncrossing", bad, pairs,
                      "; clause hits " + std::to_string(clause[0]) + "/" + std::to_string(clause[1]) + "/" +
                          std::to_string(clause[2]));
}

// k+ = pi(0) + pi(1) - k- mod L, with pi ordering zeta = omega + J-.
inline TestResult k_relation(std::size_t count, std::uint64_t seed) {
  std::size_t bad = 0;
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t L = 3 + r % 100;
    const auto d = stats::realization(seed, r, L);
    const auto zeta = detail::zeta_of(d);
    std::vector<std::size_t> pi(L);
    for (std::size_t i = 0; i < L; ++i) pi[i] = i;
    std::sort(pi.begin(), pi.end(), [&](std::size_t a, std::size_t b) { return zeta[a] < zeta[b]; });
    const std::size_t km = toy::negative_threshold(d).k;
    if (toy::positive_threshold(d).k != (pi[0] + pi[1] + L - km) % L) ++bad;
  }
  return count_result("k_plus_k_minus_relation", bad, count);
}

// Threshold-to-threshold extents step through the lower records of zeta on
// either side of k- (slow reference engine).
inline TestResult record_extents(std::size_t count, std::uint64_t seed) {
  std::size_t bad = 0;
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t L = 4 + r % 200;
    const auto d = stats::realization(seed, r, L);
    const auto evo = toy::t2t_evolve_slow(d);
    const auto zeta = detail::zeta_of(d);
    const std::size_t k = toy::negative_threshold(d).k;
    std::vector<Site> left;
    std::vector<Site> right;
    for (const auto& e : evo.trace.events) {
      if (left.empty() || left.back() != e.j_L) left.push_back(e.j_L);
      if (right.empty() || right.back() != e.j_R) right.push_back(e.j_R);
    }
    if (evo.trace.events.empty()) {
      // no avalanche exactly when k- holds one of the two smallest zeta
      if (std::count_if(zeta.begin(), zeta.end(), [&](double v) { return v < zeta[k]; }) > 1) ++bad;
      continue;
    }
    if (left != detail::lower_records(zeta, k, -1) || right != detail::lower_records(zeta, k, +1)) ++bad;
  }
  return count_result("t2t_record_extents", bad, count);
}

inline TestResult correspondence(std::size_t count, std::size_t L, std::uint64_t seed) {
  std::size_t bad = 0;
  std::string first;
  for (std::size_t r = 0; r < count; ++r) {
    const auto rep = oracle::correspondence_check(stats::realization(seed, r, L));
    if (!rep.ok || rep.topples != rep.sigma_total) {
      if (bad == 0) first = "; first failure at realization " + std::to_string(r) + ": " + rep.message;
      ++bad;
    }
  }
  return count_result("sandpile_correspondence", bad, count, first);
}

}  // namespace cdw::checks

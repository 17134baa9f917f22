#pragma once

// Independent reference engines used to validate the fast paths: dense
// linear solves for the full chain, event-driven avalanches that re-solve
// after every jump, exhaustive threshold search, and the one-dimensional
// sandpile with its correspondence to threshold-to-threshold evolution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cdw/lattice.hpp"
#include "cdw/toy_model.hpp"

namespace cdw::oracle {

// Row-major dense matrix solve by Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw InvalidLattice("dense_solve: matrix/vector size mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (a[piv * n + col] == 0.0) throw InternalError("dense_solve: singular matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double acc = b[k];
    for (std::size_t c = k + 1; c < n; ++c) acc -= a[k * n + c] * x[c];
    x[k] = acc / a[k * n + k];
  }
  return x;
}

// lambda I - periodic Laplacian, row-major.
inline std::vector<double> shifted_laplacian(std::size_t n, double lambda) {
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    a[i * n + i] = lambda + 2.0;
    a[i * n + (i + 1) % n] -= 1.0;
    a[i * n + (i + n - 1) % n] -= 1.0;
  }
  return a;
}

// Well coordinates from the periodic system (lambda - lap) y = lambda (m + alpha) + F.
inline RealField full_coords_dense(const IntField& m, const Disorder& d, const ModelParams& p) {
  const std::size_t n = m.size();
  if (n != d.size()) throw InvalidLattice("length mismatch");
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = p.lambda * (static_cast<double>(m.values()[i]) + d.alpha.values()[i]) + p.F;
  }
  const auto y = dense_solve(shifted_laplacian(n, p.lambda), rhs);
  RealField out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[static_cast<Site>(i)] = y[i] - d.alpha.values()[i] - static_cast<double>(m.values()[i]);
  }
  return out;
}

namespace detail {

inline std::size_t argmax(const RealField& y) {
  return static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
}

}  // namespace detail

struct NaiveForced {
  IntField m;
  double F_star = 0.0;
  std::size_t jumps = 0;
};

// Raise F until the top particle reaches the cusp, then jump one maximal
// particle at a time, re-solving the whole system after each jump.
inline NaiveForced naive_avalanche_with_force(const IntField& m0, const Disorder& d, const ModelParams& p) {
  const double tol = 1e-12;
  IntField m = m0;
  ModelParams q = p;
  const auto y0 = full_coords_dense(m, d, q);
  q.F += p.lambda * (0.5 - y0[static_cast<Site>(detail::argmax(y0))]);
  std::size_t jumps = 0;
  std::size_t next = detail::argmax(y0);
  for (;;) {
    m[static_cast<Site>(next)] += 1;
    if (++jumps > m.size()) throw SlidingDetected("naive avalanche exceeded L jumps");
    const auto y = full_coords_dense(m, d, q);
    next = detail::argmax(y);
    if (!(y[static_cast<Site>(next)] > 0.5 + tol)) break;
  }
  return NaiveForced{std::move(m), q.F, jumps};
}

inline IntField naive_zfa_full(const IntField& m0, const Disorder& d, const ModelParams& p) {
  const double tol = 1e-12;
  IntField m = m0;
  const auto y0 = full_coords_dense(m, d, p);
  std::size_t next = detail::argmax(y0);
  const double cutoff = y0[static_cast<Site>(next)];
  std::size_t jumps = 0;
  for (;;) {
    m[static_cast<Site>(next)] += 1;
    if (++jumps > m.size()) throw SlidingDetected("naive zero-force avalanche exceeded L jumps");
    const auto y = full_coords_dense(m, d, p);
    next = detail::argmax(y);
    if (!(y[static_cast<Site>(next)] > cutoff + tol)) break;
  }
  return m;
}

inline constexpr std::size_t kBruteMaxL = 12;

struct BruteThreshold {
  IntField m_plus;
  IntField m_minus;
  double max_value = 0.0;  // min over candidates of max_i z_i
  double min_value = 0.0;  // max over candidates of min_i z_i
};

namespace detail {

// Depth-first enumeration of lap(m) in [-B, B]^L with zero sum and index
// moment divisible by L. `visit(prefix_value_ok, ...)` style pruning is done
// by the caller-supplied bound on partial objectives.
template <class Partial, class Leaf>
void enumerate_laplacians(std::size_t n, int B, Partial partial_ok, Leaf leaf) {
  std::vector<std::int64_t> dm(n, 0);
  const auto L = static_cast<std::int64_t>(n);
  auto rec = [&](auto&& self, std::size_t i, std::int64_t sum, std::int64_t moment) -> void {
    const auto remaining = static_cast<std::int64_t>(n - i);
    if (i + 1 == n) {
      const std::int64_t last = -sum;
      if (last < -B || last > B) return;
      if (((moment + static_cast<std::int64_t>(i) * last) % L + L) % L != 0) return;
      dm[i] = last;
      if (!partial_ok(dm, i)) return;
      leaf(dm);
      return;
    }
    for (std::int64_t v = -B; v <= B; ++v) {
      const std::int64_t s = sum + v;
      if (s < -B * (remaining - 1) || s > B * (remaining - 1)) continue;
      dm[i] = v;
      if (!partial_ok(dm, i)) continue;
      self(self, i + 1, s, moment + static_cast<std::int64_t>(i) * v);
    }
  };
  rec(rec, 0, 0, 0);
}

}  // namespace detail

// Exhaustive min-max / max-min search for the toy model over bounded lap(m).
inline BruteThreshold brute_threshold(const Disorder& d, int B = 3) {
  const std::size_t n = d.size();
  if (n > kBruteMaxL) throw DomainError("brute_threshold: L = " + std::to_string(n) + " exceeds the search cap");
  if (B < 1) throw DomainError("brute_threshold: bound must be positive");
  const auto& da = d.delta_alpha.values();
  const double inf = std::numeric_limits<double>::infinity();

  double best_max = inf;
  std::vector<std::int64_t> arg_max;
  detail::enumerate_laplacians(
      n, B,
      [&](const std::vector<std::int64_t>& dm, std::size_t i) {
        return static_cast<double>(dm[i]) + da[i] < best_max;
      },
      [&](const std::vector<std::int64_t>& dm) {
        double v = -inf;
        for (std::size_t i = 0; i < n; ++i) v = std::max(v, static_cast<double>(dm[i]) + da[i]);
        if (v < best_max) {
          best_max = v;
          arg_max = dm;
        }
      });

  double best_min = -inf;
  std::vector<std::int64_t> arg_min;
  detail::enumerate_laplacians(
      n, B,
      [&](const std::vector<std::int64_t>& dm, std::size_t i) {
        return static_cast<double>(dm[i]) + da[i] > best_min;
      },
      [&](const std::vector<std::int64_t>& dm) {
        double v = inf;
        for (std::size_t i = 0; i < n; ++i) v = std::min(v, static_cast<double>(dm[i]) + da[i]);
        if (v > best_min) {
          best_min = v;
          arg_min = dm;
        }
      });

  if (arg_max.empty() || arg_min.empty()) throw InternalError("brute_threshold: no admissible candidate");
  return BruteThreshold{invert_laplacian(IntField(arg_max)), invert_laplacian(IntField(arg_min)), best_max, best_min};
}

// Exhaustive min-max search for the full chain, using a dense inverse of
// (lambda - lap) built column by column.
inline IntField brute_threshold_full(const Disorder& d, const ModelParams& p, int B = 3) {
  const std::size_t n = d.size();
  if (n > kBruteMaxL) throw DomainError("brute_threshold_full: L exceeds the search cap");
  const auto A = shifted_laplacian(n, p.lambda);
  std::vector<double> G(n * n);
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> e(n, 0.0);
    e[c] = 1.0;
    const auto col = dense_solve(A, e);
    for (std::size_t r = 0; r < n; ++r) G[r * n + c] = col[r];
  }
  const auto& da = d.delta_alpha.values();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> arg;
  std::vector<double> w(n);
  detail::enumerate_laplacians(
      n, B, [](const std::vector<std::int64_t>&, std::size_t) { return true; },
      [&](const std::vector<std::int64_t>& dm) {
        for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<double>(dm[i]) + da[i];
        double v = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < n; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < n; ++c) acc += G[r * n + c] * w[c];
          v = std::max(v, acc);
          if (v >= best) return;
        }
        best = v;
        arg = dm;
      });
  if (arg.empty()) throw InternalError("brute_threshold_full: no admissible candidate");
  return invert_laplacian(IntField(arg));
}

// Repeatedly apply zfa_toy from m = 0 until an application jumps every site.
struct ZfaStep {
  std::size_t jumps = 0;
  double X_after = 0.0;
  std::int64_t sigma_cum = 0;
};

struct ZfaRun {
  std::vector<ZfaStep> steps;
  toy::ToyConfig final;
};

inline ZfaRun flat_by_zfa(const Disorder& d, std::size_t max_steps = 10'000'000) {
  const std::size_t n = d.size();
  const double zpm = toy::z_plus_max(d);
  auto cfg = toy::make_toy_config(IntField(n, 0), d);
  ZfaRun run;
  std::int64_t sigma = 0;
  for (std::size_t step = 0; step < max_steps; ++step) {
    auto r = toy::zfa_toy(cfg, d);
    if (r.jumped.size() == n) {
      run.final = std::move(cfg);
      return run;
    }
    sigma += static_cast<std::int64_t>(r.jumped.size());
    cfg = std::move(r.config);
    run.steps.push_back({r.jumped.size(), *std::max_element(cfg.z.begin(), cfg.z.end()) - zpm, sigma});
  }
  throw IterationCapExceeded("flat_by_zfa: step cap exceeded");
}

// Jump sites above a level in an arbitrary (seeded) order until none remain.
// `above(key)` decides on exact order keys.
template <class Above>
std::int64_t relax_where(toy::ToyConfig& cfg, const Disorder& d, Above above, std::uint64_t order_seed) {
  const std::size_t n = cfg.m.size();
  const auto L = static_cast<std::int64_t>(n);
  auto keys = toy::detail::keys_of(cfg, d);
  std::vector<std::size_t> pending;
  std::vector<char> listed(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (above(i, keys[i])) {
      pending.push_back(i);
      listed[i] = 1;
    }
  }
  std::mt19937_64 rng(order_seed);
  std::int64_t jumps = 0;
  while (!pending.empty()) {
    std::size_t pick = pending.size() - 1;
    if (order_seed != 0) pick = std::uniform_int_distribution<std::size_t>(0, pending.size() - 1)(rng);
    const std::size_t j = pending[pick];
    pending[pick] = pending.back();
    pending.pop_back();
    listed[j] = 0;
    if (!above(j, keys[j])) continue;
    cfg = toy::toy_jump(std::move(cfg), static_cast<Site>(j));
    keys[j] -= 2 * L;
    ++jumps;
    for (const std::size_t s : {(j + n - 1) % n, j, (j + 1) % n}) {
      if (s != j) keys[s] += L;
      if (!listed[s] && above(s, keys[s])) {
        listed[s] = 1;
        pending.push_back(s);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) toy::detail::refresh_z(cfg, d, static_cast<Site>(i));
  return jumps;
}

// Relaxes every site with z_i > level; returns the number of jumps.
inline std::int64_t relax_above_level(toy::ToyConfig& cfg, const Disorder& d, double level, std::uint64_t seed = 0) {
  return relax_where(
      cfg, d,
      [&](std::size_t i, std::int64_t key) {
        const auto L = static_cast<std::int64_t>(d.size());
        const std::int64_t charge = (key - static_cast<std::int64_t>(d.rank[i])) / L;
        return d.omega.values()[i] + static_cast<double>(charge) > level;
      },
      seed);
}

// Relaxes every site whose exact key exceeds `key_level`.
inline std::int64_t relax_above_key(toy::ToyConfig& cfg, const Disorder& d, std::int64_t key_level,
                                    std::uint64_t seed = 0) {
  return relax_where(cfg, d, [&](std::size_t, std::int64_t key) { return key > key_level; }, seed);
}

// One-dimensional sandpile on sites 1..N (stored 0..N-1) with absorbing
// pockets on both ends.
struct SandpileState {
  std::vector<std::int64_t> h;

  bool stable() const {
    return std::all_of(h.begin(), h.end(), [](std::int64_t v) { return v == 0 || v == 1; });
  }
  friend bool operator==(const SandpileState&, const SandpileState&) = default;
};

struct Stabilized {
  SandpileState state;
  std::int64_t topples = 0;
};

// Topple any site with h >= 2 until stable. order_seed == 0 topples the most
// recently activated site first; otherwise a random unstable site is chosen.
inline Stabilized sandpile_stabilize(SandpileState s, std::uint64_t order_seed = 0) {
  const std::size_t n = s.h.size();
  for (auto v : s.h) {
    if (v < 0) throw DomainError("sandpile heights must be nonnegative");
  }
  std::vector<std::size_t> pending;
  std::vector<char> listed(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (s.h[i] >= 2) {
      pending.push_back(i);
      listed[i] = 1;
    }
  }
  std::mt19937_64 rng(order_seed);
  std::int64_t topples = 0;
  while (!pending.empty()) {
    std::size_t pick = pending.size() - 1;
    if (order_seed != 0) pick = std::uniform_int_distribution<std::size_t>(0, pending.size() - 1)(rng);
    const std::size_t j = pending[pick];
    pending[pick] = pending.back();
    pending.pop_back();
    listed[j] = 0;
    if (s.h[j] < 2) continue;
    s.h[j] -= 2;
    ++topples;
    if (s.h[j] >= 2) {
      listed[j] = 1;
      pending.push_back(j);
    }
    for (const std::ptrdiff_t nb : {static_cast<std::ptrdiff_t>(j) - 1, static_cast<std::ptrdiff_t>(j) + 1}) {
      if (nb < 0 || nb >= static_cast<std::ptrdiff_t>(n)) continue;  // pocket
      const auto u = static_cast<std::size_t>(nb);
      s.h[u] += 1;
      if (s.h[u] >= 2 && !listed[u]) {
        listed[u] = 1;
        pending.push_back(u);
      }
    }
  }
  return Stabilized{std::move(s), topples};
}

struct CorrespondenceReport {
  bool ok = false;
  std::string message;
  std::size_t active = 0;        // sandpile sites in the active arc
  std::size_t grain_site = 0;    // 1-based sandpile position of the added grain
  std::int64_t topples = 0;
  std::int64_t sigma_total = 0;  // total jumps of the threshold-to-threshold run
  SandpileState before;
  SandpileState after;
  SandpileState expected;
};

// Maps the negative threshold to a recurrent sandpile state on L - 2 sites,
// adds a grain at the image of k-, stabilizes, and compares with the image of
// the positive threshold and with the total number of jumps.
//
// Layout: the left pocket stands for the left terminal. Sandpile positions
// 1..A are the sites strictly between the terminals going through k- (left
// to right); position A+1 stands for the right terminal, with height equal to
// its mark (0 at the negative threshold, 1 once the avalanche reaches it);
// the remaining positions carry the far arc starting next to the right
// terminal. The far-arc site adjacent to the left terminal has no image.
inline CorrespondenceReport correspondence_check(const Disorder& d) {
  const std::size_t n = d.size();
  const auto minus = toy::negative_threshold(d);
  const auto plus = toy::positive_threshold(d);
  std::vector<double> zeta(n);
  for (std::size_t i = 0; i < n; ++i) {
    zeta[i] = d.omega.values()[i] + static_cast<double>(minus.J.values()[i]);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return zeta[a] < zeta[b]; });
  const std::size_t p0 = order[0];
  const std::size_t p1 = order[1];
  const std::size_t k = minus.k;

  CorrespondenceReport rep;
  rep.sigma_total = toy::t2t_events(d).total();
  const auto is_terminal = [&](std::size_t s) { return s == p0 || s == p1; };
  const auto wrap = [&](Site s) { return static_cast<std::size_t>(((s % static_cast<Site>(n)) + n) % n); };

  if (is_terminal(k)) {
    rep.ok = rep.sigma_total == 0 && min_normalized(minus.m) == min_normalized(plus.m);
    rep.message = rep.ok ? "degenerate: defect on a terminal, nothing moves" : "degenerate case moved";
    return rep;
  }

  Site left = -1;
  while (!is_terminal(wrap(static_cast<Site>(k) + left))) --left;
  Site right = 1;
  while (!is_terminal(wrap(static_cast<Site>(k) + right))) ++right;
  const auto A = static_cast<std::size_t>(right - left - 1);
  const std::size_t N = n - 2;
  rep.active = A;
  rep.grain_site = static_cast<std::size_t>(-left);

  std::vector<std::size_t> sites;  // toy site for each sandpile position
  for (Site off = left + 1; off < right; ++off) sites.push_back(wrap(static_cast<Site>(k) + off));
  for (Site off = right; sites.size() < N; ++off) sites.push_back(wrap(static_cast<Site>(k) + off));
  const std::size_t right_terminal = wrap(static_cast<Site>(k) + right);

  const auto height = [&](double z, std::size_t s) -> std::int64_t {
    const auto mark = static_cast<std::int64_t>(std::lround(z - zeta[s]));
    return s == right_terminal ? mark : 1 + mark;
  };

  SandpileState before{std::vector<std::int64_t>(N)};
  SandpileState expected{std::vector<std::int64_t>(N)};
  for (std::size_t q = 0; q < N; ++q) {
    const std::size_t s = sites[q];
    before.h[q] = height(minus.z.values()[s], s);
    expected.h[q] = height(plus.z.values()[s], s);
  }
  before.h[rep.grain_site - 1] -= 1;  // the k- overline is the grain added below
  rep.before = before;

  const auto zeros = std::count(before.h.begin(), before.h.end(), 0);
  if (!before.stable() || zeros > 1) {
    rep.message = "negative threshold does not map to a recurrent state";
    return rep;
  }
  SandpileState kicked = before;
  kicked.h[rep.grain_site - 1] += 1;
  auto res = sandpile_stabilize(std::move(kicked));
  rep.after = res.state;
  rep.topples = res.topples;
  rep.expected = expected;
  const bool states_match = rep.after == expected;
  const bool counts_match = rep.topples == rep.sigma_total;
  rep.ok = states_match && counts_match;
  if (!states_match) {
    rep.message = "stabilized sandpile differs from the image of the positive threshold";
  } else if (!counts_match) {
    rep.message = "topple count " + std::to_string(rep.topples) + " differs from total jumps " +
                  std::to_string(rep.sigma_total);
  } else {
    rep.message = "ok";
  }
  return rep;
}

}  // namespace cdw::oracle

#pragma once

// The truncated (toy) chain in rescaled coordinates z = lap(m) + lap(alpha).
//
// Comparisons between coordinates are done on exact integer keys: with
// charge_i = lap(m)_i + round(lap(alpha)_i) we have z_i = omega_i + charge_i,
// and key_i = charge_i * L + rank_i (rank of omega_i) orders z exactly, with
// z_a + c <= z_b  <=>  key_a + c*L < key_b  for integer c >= 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdw/key_tree.hpp"
#include "cdw/lattice.hpp"

namespace cdw::toy {

struct ToyConfig {
  IntField m;
  RealField z;
  IntField charge;  // lap(m) + round(lap(alpha)); nonzero entries are defects
};

inline RealField z_of(const IntField& m, const Disorder& d) {
  if (m.size() != d.size()) throw InvalidLattice("length mismatch between m and disorder");
  const auto lap = periodic_laplacian(m);
  RealField z(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    z[static_cast<Site>(i)] = static_cast<double>(lap.values()[i]) + d.delta_alpha.values()[i];
  }
  return z;
}

inline ToyConfig make_toy_config(IntField m, const Disorder& d) {
  if (m.size() != d.size()) throw InvalidLattice("length mismatch between m and disorder");
  const std::size_t n = m.size();
  auto charge = periodic_laplacian(m);
  RealField z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<Site>(i);
    charge[s] += d.rounded[s];
    z[s] = d.omega[s] + static_cast<double>(charge[s]);
  }
  return ToyConfig{std::move(m), std::move(z), std::move(charge)};
}

// Single jump at j: m_j + 1, z_j - 2, z_{j +- 1} + 1.
inline ToyConfig toy_jump(ToyConfig cfg, Site j) {
  cfg.m[j] += 1;
  cfg.z[j] -= 2.0;
  cfg.z[j - 1] += 1.0;
  cfg.z[j + 1] += 1.0;
  cfg.charge[j] -= 2;
  cfg.charge[j - 1] += 1;
  cfg.charge[j + 1] += 1;
  return cfg;
}

namespace detail {

inline std::int64_t order_key(std::int64_t charge, std::size_t rank, std::size_t L) noexcept {
  return charge * static_cast<std::int64_t>(L) + static_cast<std::int64_t>(rank);
}

inline std::vector<std::int64_t> keys_of(const ToyConfig& c, const Disorder& d) {
  const std::size_t n = c.charge.size();
  std::vector<std::int64_t> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = order_key(c.charge.values()[i], d.rank[i], n);
  return k;
}

inline void refresh_z(ToyConfig& c, const Disorder& d, Site i) {
  c.z[i] = d.omega[i] + static_cast<double>(c.charge[i]);
}

inline std::size_t argmax(const std::vector<std::int64_t>& keys) {
  return static_cast<std::size_t>(std::max_element(keys.begin(), keys.end()) - keys.begin());
}

struct Extents {
  Site i_L;
  Site i_R;
};

// Nearest sites on either side of i with z + 1 <= z_i, in unwrapped
// coordinates around i. Empty when the ZFA from i would jump every site.
template <class KeyAt>
std::optional<Extents> scan_extents(std::size_t i, std::size_t n, KeyAt key) {
  const auto L = static_cast<std::int64_t>(n);
  const std::int64_t K = key(i);
  std::size_t dl = 0;
  for (std::size_t dist = 1; dist < n; ++dist) {
    if (key((i + n - dist) % n) < K - L) {
      dl = dist;
      break;
    }
  }
  if (dl == 0) return std::nullopt;
  std::size_t dr = 0;
  for (std::size_t dist = 1; dist < n; ++dist) {
    if (key((i + dist) % n) < K - L) {
      dr = dist;
      break;
    }
  }
  if (dr == 0) throw InternalError("extent found on one side only");
  if (dl + dr == n && !(key((i + dr) % n) < K - 2 * L)) return std::nullopt;
  const auto s = static_cast<Site>(i);
  return Extents{s - static_cast<Site>(dl), s + static_cast<Site>(dr)};
}

// The four charge changes of one complete avalanche.
template <class Apply>
void avalanche_charge_changes(Site i, Site i_L, Site i_R, Apply apply) {
  apply(i_L, +1);
  apply(i_R, +1);
  const Site mirror = i_L + i_R - i;
  if (mirror == i) {
    apply(i, -2);
  } else {
    apply(i, -1);
    apply(mirror, -1);
  }
}

inline std::int64_t trapezoid(Site j, Site i, Site i_L, Site i_R) noexcept {
  const auto pos = [](Site x) { return x > 0 ? x : Site{0}; };
  return pos(j - i_L) - pos(j - i) - pos(j - (i_L + i_R - i)) + pos(j - i_R);
}

}  // namespace detail

struct ZfaResult {
  ToyConfig config;
  std::vector<std::size_t> jumped;  // ascending site indices
};

// One zero-force avalanche: record the maximum, jump the argmax, and keep
// jumping sites whose coordinate exceeds the recorded maximum.
inline ZfaResult zfa_toy(ToyConfig cfg, const Disorder& d) {
  const std::size_t n = cfg.m.size();
  if (n != d.size()) throw InvalidLattice("length mismatch between config and disorder");
  auto keys = detail::keys_of(cfg, d);
  const std::size_t top = detail::argmax(keys);
  const std::int64_t K = keys[top];
  const auto L = static_cast<std::int64_t>(n);

  std::vector<char> queued(n, 0);
  std::vector<std::size_t> stack{top};
  std::vector<std::size_t> jumped;
  queued[top] = 1;
  while (!stack.empty()) {
    const std::size_t j = stack.back();
    stack.pop_back();
    if (jumped.size() == n) throw InternalError("zero-force avalanche exceeded L jumps");
    jumped.push_back(j);
    const auto s = static_cast<Site>(j);
    cfg.m[s] += 1;
    cfg.charge[s] -= 2;
    keys[j] -= 2 * L;
    if (keys[j] > K) throw InternalError("site " + std::to_string(j) + " exceeds the maximum after jumping");
    for (const std::size_t nb : {(j + n - 1) % n, (j + 1) % n}) {
      cfg.charge[static_cast<Site>(nb)] += 1;
      keys[nb] += L;
      if (keys[nb] > K && !queued[nb]) {
        queued[nb] = 1;
        stack.push_back(nb);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) detail::refresh_z(cfg, d, static_cast<Site>(i));
  std::sort(jumped.begin(), jumped.end());
  return ZfaResult{std::move(cfg), std::move(jumped)};
}

struct AvalancheEvent {
  std::size_t init_site = 0;
  Site i_L = 0;  // exclusive extents, unwrapped so that i_L < init_site < i_R
  Site i_R = 0;
  std::int64_t size = 0;
  double X_after = 0.0;
  std::int64_t sigma_cum = 0;
  Site j_L = 0;  // cumulative extents relative to the negative-threshold defect
  Site j_R = 0;  // (threshold-to-threshold runs only)
};

struct ThresholdConfig {
  IntField m;      // min-normalized
  RealField z;
  std::size_t k = 0;
  IntField J;
};

namespace detail {

inline std::size_t mod_index(std::int64_t v, std::size_t n) {
  const auto L = static_cast<std::int64_t>(n);
  const std::int64_t r = v % L;
  return static_cast<std::size_t>(r < 0 ? r + L : r);
}

inline IntField j_plus(const Disorder& d) {
  const std::size_t n = d.size();
  IntField J(n, 0);
  if (d.S >= 0) {
    const auto count = static_cast<std::size_t>(d.S) + 1;
    if (count > n) throw InternalError("S + 1 exceeds L");
    for (std::size_t r = 0; r < count; ++r) J[static_cast<Site>(d.sigma[r])] = 1;
  } else {
    const auto count = static_cast<std::size_t>(-d.S) - 1;
    for (std::size_t r = n - count; r < n; ++r) J[static_cast<Site>(d.sigma[r])] = -1;
  }
  return J;
}

inline IntField j_minus(const Disorder& d) {
  const std::size_t n = d.size();
  IntField J(n, 0);
  if (d.S > 0) {
    const auto count = static_cast<std::size_t>(d.S) - 1;
    for (std::size_t r = 0; r < count; ++r) J[static_cast<Site>(d.sigma[r])] = 1;
  } else {
    const auto count = static_cast<std::size_t>(-d.S) + 1;
    if (count > n) throw InternalError("|S| + 1 exceeds L");
    for (std::size_t r = n - count; r < n; ++r) J[static_cast<Site>(d.sigma[r])] = -1;
  }
  return J;
}

inline std::int64_t index_moment(const Disorder& d, const IntField& J) {
  const auto L = static_cast<std::int64_t>(d.size());
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto s = static_cast<Site>(i);
    acc = (acc + static_cast<std::int64_t>(i) * (J[s] - d.rounded[s])) % L;
  }
  return acc;
}

inline ThresholdConfig build_threshold(const Disorder& d, IntField J, std::size_t k, int defect) {
  const std::size_t n = d.size();
  IntField ell(n);
  RealField z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<Site>(i);
    const std::int64_t c = J[s] + (i == k ? defect : 0);
    ell[s] = c - d.rounded[s];
    z[s] = d.omega[s] + static_cast<double>(c);
  }
  return ThresholdConfig{invert_laplacian(ell), std::move(z), k, std::move(J)};
}

}  // namespace detail

inline std::size_t positive_index(const Disorder& d) {
  return detail::mod_index(detail::index_moment(d, detail::j_plus(d)), d.size());
}

inline std::size_t negative_index(const Disorder& d) {
  return detail::mod_index(-detail::index_moment(d, detail::j_minus(d)), d.size());
}

// Closed-form minimizer of max z over well numbers.
inline ThresholdConfig positive_threshold(const Disorder& d) {
  auto J = detail::j_plus(d);
  const std::size_t k = detail::mod_index(detail::index_moment(d, J), d.size());
  return detail::build_threshold(d, std::move(J), k, -1);
}

// Closed-form maximizer of min z over well numbers.
inline ThresholdConfig negative_threshold(const Disorder& d) {
  auto J = detail::j_minus(d);
  const std::size_t k = detail::mod_index(-detail::index_moment(d, J), d.size());
  return detail::build_threshold(d, std::move(J), k, +1);
}

// max_i z+_i by case analysis on S and on where the positive defect sits.
inline double z_plus_max(const Disorder& d) {
  const std::size_t n = d.size();
  const std::int64_t S = d.S;
  const std::size_t k = positive_index(d);
  const auto& sigma = d.sigma;
  const auto w = [&](std::size_t r) { return d.omega.values()[sigma[r]]; };
  const auto uS = static_cast<std::size_t>(S >= 0 ? S : -S);
  if (S >= 0 && k != sigma[uS]) return w(uS) + 1.0;
  if (S > 0) return w(uS - 1) + 1.0;
  if (S == 0) return w(n - 1);
  if (k != sigma[n - uS]) return w(n - uS);
  return w(n - uS - 1);
}

struct ThresholdForce {
  double z_plus_max = 0.0;
  double F_th = 0.0;
};

inline ThresholdForce threshold_max_and_force(const Disorder& d, const ModelParams& p) {
  const double zmax = z_plus_max(d);
  return ThresholdForce{zmax, p.lambda * (0.5 - p.eta * zmax)};
}

struct AggregateResult {
  ToyConfig config;
  AvalancheEvent event;
};

// One complete avalanche (all waves of the ZFA sharing one initiation site),
// applied in closed form. Throws NoExtentError when the next ZFA would jump
// every site, i.e. the configuration is in the threshold family.
inline AggregateResult avalanche_aggregate(ToyConfig cfg, const Disorder& d, double zplus_max) {
  const std::size_t n = cfg.m.size();
  if (n != d.size()) throw InvalidLattice("length mismatch between config and disorder");
  auto keys = detail::keys_of(cfg, d);
  const std::size_t i = detail::argmax(keys);
  const auto ext = detail::scan_extents(i, n, [&](std::size_t s) { return keys[s]; });
  if (!ext) throw NoExtentError("no avalanche extent within one period: configuration is at threshold");
  const auto si = static_cast<Site>(i);
  const auto [i_L, i_R] = *ext;
  detail::avalanche_charge_changes(si, i_L, i_R, [&](Site s, int dq) {
    cfg.charge[s] += dq;
    keys[cfg.charge.wrap(s)] += dq * static_cast<std::int64_t>(n);
    detail::refresh_z(cfg, d, s);
  });
  for (Site j = i_L + 1; j < i_R; ++j) cfg.m[j] += detail::trapezoid(j, si, i_L, i_R);

  AvalancheEvent ev;
  ev.init_site = i;
  ev.i_L = i_L;
  ev.i_R = i_R;
  ev.size = static_cast<std::int64_t>(si - i_L) * static_cast<std::int64_t>(i_R - si);
  ev.sigma_cum = ev.size;
  const std::size_t top = detail::argmax(keys);
  ev.X_after = cfg.z.values()[top] - zplus_max;
  return AggregateResult{std::move(cfg), ev};
}

inline AggregateResult avalanche_aggregate(ToyConfig cfg, const Disorder& d) {
  return avalanche_aggregate(std::move(cfg), d, z_plus_max(d));
}

struct EventTrace {
  std::size_t L = 0;
  double X_initial = 0.0;
  std::vector<AvalancheEvent> events;

  std::int64_t total() const noexcept { return events.empty() ? 0 : events.back().sigma_cum; }
};

struct Evolution {
  EventTrace trace;
  ToyConfig final;
};

// Rank-diagram state of the threshold-to-threshold evolution, in coordinates
// centered on the negative-threshold defect k-. Only the two overlines at the
// cumulative extents a, b and the underline at u = a + b move.
class RankState {
 public:
  static RankState make(std::vector<double> zeta, std::size_t k_minus) {
    RankState st;
    const std::size_t n = zeta.size();
    if (n < 3) throw InvalidLattice("periodic lattice needs L >= 3");
    if (k_minus >= n) throw InvalidLattice("k_minus out of range");
    st.L_ = n;
    st.zeta_ = std::move(zeta);
    st.k_minus_ = k_minus;
    st.pi_.resize(n);
    std::iota(st.pi_.begin(), st.pi_.end(), std::size_t{0});
    std::stable_sort(st.pi_.begin(), st.pi_.end(), [&](std::size_t a, std::size_t b) { return st.zeta_[a] < st.zeta_[b]; });
    st.rank_.resize(n);
    for (std::size_t r = 0; r < n; ++r) st.rank_[st.pi_[r]] = r;
    if (st.zeta_[st.pi_[n - 1]] - st.zeta_[st.pi_[0]] >= 1.0) throw InternalError("zeta spread is not below 1");
    st.marks_.assign(n, 0);
    st.marks_[k_minus] = 1;

    const std::size_t kp = (st.pi_[0] + st.pi_[1] + n - k_minus) % n;
    st.z_plus_max_ = st.zeta_[kp == st.pi_[1] ? st.pi_[0] : st.pi_[1]] + 1.0;

    const std::size_t r0 = st.rank_[k_minus];
    if (r0 > 1) {
      st.collect_records(-1, st.left_);
      st.collect_records(+1, st.right_);
    }
    return st;
  }

  static RankState from_disorder(const Disorder& d) {
    const auto J = detail::j_minus(d);
    std::vector<double> zeta(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      zeta[i] = d.omega.values()[i] + static_cast<double>(J.values()[i]);
    }
    return make(std::move(zeta), negative_index(d));
  }

  std::size_t size() const noexcept { return L_; }
  std::size_t k_minus() const noexcept { return k_minus_; }
  const std::vector<double>& zeta() const noexcept { return zeta_; }
  const std::vector<std::size_t>& pi() const noexcept { return pi_; }
  const std::vector<int>& marks() const noexcept { return marks_; }
  Site j_L() const noexcept { return a_; }
  Site j_R() const noexcept { return b_; }
  Site underline() const noexcept { return u_; }
  double z_plus_max() const noexcept { return z_plus_max_; }
  double X_initial() const noexcept { return zeta_[k_minus_] + 1.0 - z_plus_max_; }
  std::int64_t sigma() const noexcept { return sigma_; }
  // Lower-record offsets of the left/right sequences, ending at the terminals.
  const std::vector<Site>& left_records() const noexcept { return left_; }
  const std::vector<Site>& right_records() const noexcept { return right_; }

  std::size_t site(Site offset) const noexcept {
    const auto n = static_cast<Site>(L_);
    const Site r = (static_cast<Site>(k_minus_) + offset) % n;
    return static_cast<std::size_t>(r < 0 ? r + n : r);
  }

  bool done() const noexcept {
    return left_.empty() || (started_ && ia_ + 1 == left_.size() && ib_ + 1 == right_.size());
  }

  std::vector<double> z() const {
    std::vector<double> out(L_);
    for (std::size_t i = 0; i < L_; ++i) out[i] = zeta_[i] + marks_[i];
    return out;
  }

  std::optional<AvalancheEvent> step() {
    if (done()) return std::nullopt;
    AvalancheEvent ev;
    Site init = 0;
    Site lo = 0;
    Site hi = 0;
    if (!started_) {
      started_ = true;
      init = 0;
      lo = a_ = left_[0];
      hi = b_ = right_[0];
      u_ = a_ + b_;
    } else if (rank_[site(a_)] > rank_[site(b_)]) {
      if (ia_ + 1 == left_.size()) throw InternalError("left terminal reached while left corner is the maximum");
      init = a_;
      lo = left_[++ia_];
      hi = u_;
      u_ += lo - a_;
      a_ = lo;
    } else {
      if (ib_ + 1 == right_.size()) throw InternalError("right terminal reached while right corner is the maximum");
      init = b_;
      lo = u_;
      hi = right_[++ib_];
      u_ += hi - b_;
      b_ = hi;
    }
    detail::avalanche_charge_changes(init, lo, hi, [&](Site s, int dq) { marks_[site(s)] += dq; });
    if (!(a_ < u_ && u_ < b_)) throw InternalError("cumulative change is no longer trapezoidal");

    ev.init_site = site(init);
    const auto si = static_cast<Site>(ev.init_site);
    ev.i_L = si - (init - lo);
    ev.i_R = si + (hi - init);
    ev.size = static_cast<std::int64_t>(init - lo) * static_cast<std::int64_t>(hi - init);
    sigma_ += ev.size;
    if (sigma_ != -static_cast<std::int64_t>(a_) * static_cast<std::int64_t>(b_)) {
      throw InternalError("cumulative size differs from the product of extents");
    }
    ev.sigma_cum = sigma_;
    ev.j_L = a_;
    ev.j_R = b_;
    ev.X_after = std::max(zeta_[site(a_)], zeta_[site(b_)]) + 1.0 - z_plus_max_;
    return ev;
  }

 private:
  void collect_records(Site dir, std::vector<Site>& out) const {
    std::size_t best = rank_[k_minus_];
    for (Site p = dir;; p += dir) {
      const std::size_t r = rank_[site(p)];
      if (r < best) {
        best = r;
        out.push_back(p);
      }
      if (r <= 1) break;
    }
  }

  std::size_t L_ = 0;
  std::vector<double> zeta_;
  std::vector<std::size_t> pi_;
  std::vector<std::size_t> rank_;
  std::vector<int> marks_;
  std::size_t k_minus_ = 0;
  double z_plus_max_ = 0.0;
  std::vector<Site> left_;
  std::vector<Site> right_;
  std::size_t ia_ = 0;
  std::size_t ib_ = 0;
  bool started_ = false;
  Site a_ = 0;
  Site b_ = 0;
  Site u_ = 0;
  std::int64_t sigma_ = 0;
};

// Threshold-to-threshold event sequence via the rank-diagram engine.
inline EventTrace t2t_events(const Disorder& d) {
  auto st = RankState::from_disorder(d);
  EventTrace trace{d.size(), st.X_initial(), {}};
  while (auto ev = st.step()) trace.events.push_back(*ev);
  return trace;
}

inline Evolution t2t_evolve(const Disorder& d) {
  auto trace = t2t_events(d);
  const auto minus = negative_threshold(d);
  auto m = positive_threshold(d).m;
  const std::int64_t target = std::accumulate(minus.m.begin(), minus.m.end(), std::int64_t{0}) + trace.total();
  const std::int64_t have = std::accumulate(m.begin(), m.end(), std::int64_t{0});
  const auto L = static_cast<std::int64_t>(d.size());
  if ((target - have) % L != 0) throw InternalError("total jumps inconsistent with the threshold pair");
  m = plus_constant(std::move(m), (target - have) / L);
  return Evolution{std::move(trace), make_toy_config(std::move(m), d)};
}

// Reference engine: repeated closed-form avalanches on the full array state,
// starting at the negative threshold.
inline Evolution t2t_evolve_slow(const Disorder& d, std::size_t max_events = 0) {
  const std::size_t n = d.size();
  if (max_events == 0) max_events = 4 * n + 16;
  const double zpm = z_plus_max(d);
  const auto minus = negative_threshold(d);
  auto cfg = make_toy_config(minus.m, d);
  const auto k = static_cast<Site>(minus.k);
  EventTrace trace{n, *std::max_element(cfg.z.begin(), cfg.z.end()) - zpm, {}};
  std::int64_t sigma = 0;
  Site jl = 0;
  Site jr = 0;
  const auto offset_site = [&](Site off) { return static_cast<std::size_t>(cfg.m.wrap(k + off)); };
  for (;;) {
    AggregateResult r;
    try {
      r = avalanche_aggregate(cfg, d, zpm);
    } catch (const NoExtentError&) {
      break;
    }
    auto ev = r.event;
    const auto si = static_cast<Site>(ev.init_site);
    if (trace.events.empty()) {
      if (ev.init_site != minus.k) throw InternalError("first avalanche does not start at the negative defect");
      jl = ev.i_L - si;
      jr = ev.i_R - si;
    } else if (offset_site(jl) == ev.init_site && offset_site(jr) == ev.init_site) {
      throw InternalError("ambiguous avalanche corner");
    } else if (offset_site(jl) == ev.init_site) {
      jl -= si - ev.i_L;
    } else if (offset_site(jr) == ev.init_site) {
      jr += ev.i_R - si;
    } else {
      throw InternalError("avalanche " + std::to_string(trace.events.size()) +
                          " does not start at a corner of the cumulative change");
    }
    sigma += ev.size;
    ev.sigma_cum = sigma;
    ev.j_L = jl;
    ev.j_R = jr;
    trace.events.push_back(ev);
    cfg = std::move(r.config);
    if (trace.events.size() > max_events) throw IterationCapExceeded("t2t_evolve_slow: event cap exceeded");
  }
  return Evolution{std::move(trace), std::move(cfg)};
}

// Flat start m = 0 to the positive threshold, one event per complete
// avalanche, with the maximum tracked in a segment tree over exact keys.
inline Evolution flat_evolve(const Disorder& d, std::int64_t max_jumps = 0) {
  const std::size_t n = d.size();
  const auto L = static_cast<std::int64_t>(n);
  if (max_jumps == 0) max_jumps = 64 * L * L * L;
  const double zpm = z_plus_max(d);
  std::vector<std::int64_t> charge(d.rounded.begin(), d.rounded.end());
  std::vector<std::int64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = detail::order_key(charge[i], d.rank[i], n);
  KeyTree tree(keys);
  const auto z_at = [&](std::size_t i) { return d.omega.values()[i] + static_cast<double>(charge[i]); };

  EventTrace trace{n, z_at(tree.argmax()) - zpm, {}};
  std::int64_t sigma = 0;
  for (;;) {
    const std::size_t i = tree.argmax();
    const std::int64_t K = tree.max();
    const std::int64_t thr = K - L;
    std::size_t dl = 0;
    if (auto p = tree.last_below(0, i, thr)) {
      dl = i - *p;
    } else if (auto q = tree.last_below(i + 1, n, thr)) {
      dl = i + n - *q;
    } else {
      break;
    }
    std::size_t dr = 0;
    if (auto p = tree.first_below(i + 1, n, thr)) {
      dr = *p - i;
    } else if (auto q = tree.first_below(0, i, thr)) {
      dr = *q + n - i;
    } else {
      throw InternalError("extent found on one side only");
    }
    if (dl + dr == n && !(tree.key((i + dr) % n) < K - 2 * L)) break;

    const auto si = static_cast<Site>(i);
    const Site i_L = si - static_cast<Site>(dl);
    const Site i_R = si + static_cast<Site>(dr);
    detail::avalanche_charge_changes(si, i_L, i_R, [&](Site s, int dq) {
      const std::size_t w = detail::mod_index(s, n);
      charge[w] += dq;
      tree.set(w, detail::order_key(charge[w], d.rank[w], n));
    });
    AvalancheEvent ev;
    ev.init_site = i;
    ev.i_L = i_L;
    ev.i_R = i_R;
    ev.size = static_cast<std::int64_t>(dl) * static_cast<std::int64_t>(dr);
    sigma += ev.size;
    ev.sigma_cum = sigma;
    ev.X_after = z_at(tree.argmax()) - zpm;
    trace.events.push_back(ev);
    if (sigma > max_jumps) throw IterationCapExceeded("flat_evolve: jump cap exceeded");
  }

  IntField ell(n);
  for (std::size_t i = 0; i < n; ++i) ell[static_cast<Site>(i)] = charge[i] - d.rounded.values()[i];
  auto m = invert_laplacian(ell);
  if (std::accumulate(m.begin(), m.end(), std::int64_t{0}) != sigma) {
    throw InternalError("flat evolution did not end at the min-normalized threshold");
  }
  return Evolution{std::move(trace), make_toy_config(std::move(m), d)};
}

struct Observables {
  Site j_L = 0;
  Site j_R = 0;
  std::int64_t Sigma = 0;
  double P = 0.0;
};

// State of the first configuration with X <= x.
inline Observables observables_at(const EventTrace& trace, double x) {
  if (!(x >= 0.0)) throw DomainError("x must be nonnegative");
  if (x >= trace.X_initial || trace.events.empty()) return {};
  const auto it = std::find_if(trace.events.begin(), trace.events.end(),
                               [&](const AvalancheEvent& e) { return e.X_after <= x; });
  const auto& e = it == trace.events.end() ? trace.events.back() : *it;
  return Observables{e.j_L, e.j_R, e.sigma_cum, static_cast<double>(e.sigma_cum) / static_cast<double>(trace.L)};
}

}  // namespace cdw::toy

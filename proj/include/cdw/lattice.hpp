#pragma once

// Periodic-lattice primitives shared by the full and truncated models:
// fields with wrapping indices, the nearest-integer convention, the discrete
// Laplacian and its integer inversion, model parameters and quenched disorder.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cdw {

using Site = std::ptrdiff_t;

// Error hierarchy. Everything thrown by the library derives from Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidLattice : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct SumNonzeroError : Error {
  using Error::Error;
};
struct DivisibilityError : Error {
  using Error::Error;
};
struct SlidingDetected : Error {
  using Error::Error;
};
struct IterationCapExceeded : Error {
  using Error::Error;
};
struct NoExtentError : Error {
  using Error::Error;
};
struct InternalError : Error {
  using Error::Error;
};

// A length-L vector whose operator[] reduces the index mod L.
template <class T>
class Periodic {
 public:
  using value_type = T;

  Periodic() = default;
  explicit Periodic(std::size_t n, T value = T{}) : v_(n, value) {}
  Periodic(std::initializer_list<T> init) : v_(init) {}
  explicit Periodic(std::vector<T> v) : v_(std::move(v)) {}

  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }

  std::size_t wrap(Site i) const noexcept {
    const auto n = static_cast<Site>(v_.size());
    if (i >= 0 && i < n) return static_cast<std::size_t>(i);
    const Site r = i % n;
    return static_cast<std::size_t>(r < 0 ? r + n : r);
  }

  T& operator[](Site i) noexcept { return v_[wrap(i)]; }
  const T& operator[](Site i) const noexcept { return v_[wrap(i)]; }

  auto begin() noexcept { return v_.begin(); }
  auto end() noexcept { return v_.end(); }
  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }
  T* data() noexcept { return v_.data(); }
  const T* data() const noexcept { return v_.data(); }

  std::span<const T> view() const noexcept { return v_; }
  const std::vector<T>& values() const noexcept { return v_; }

  friend bool operator==(const Periodic&, const Periodic&) = default;

 private:
  std::vector<T> v_;
};

using IntField = Periodic<std::int64_t>;
using RealField = Periodic<double>;

inline IntField plus_constant(IntField v, std::int64_t c) {
  for (auto& x : v) x += c;
  return v;
}

inline IntField min_normalized(IntField v) {
  if (v.empty()) return v;
  const auto lo = *std::min_element(v.begin(), v.end());
  return plus_constant(std::move(v), -lo);
}

// Integer nearest to x with ties resolved so that x - result lies in (-1/2, 1/2].
inline std::int64_t nearest_integer(double x) noexcept {
  return static_cast<std::int64_t>(std::ceil(x - 0.5));
}

template <class T>
Periodic<T> periodic_laplacian(const Periodic<T>& v) {
  const std::size_t n = v.size();
  if (n < 3) throw InvalidLattice("periodic lattice needs L >= 3, got " + std::to_string(n));
  Periodic<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T left = v[i == 0 ? n - 1 : i - 1];
    const T right = v[i + 1 == n ? 0 : i + 1];
    out[static_cast<Site>(i)] = left - 2 * v[static_cast<Site>(i)] + right;
  }
  return out;
}

// Solves periodic_laplacian(m) == ell over the integers, returning the
// solution with min_i m_i == 0. An integer solution exists iff
// sum(ell) == 0 and sum(i * ell_i) == 0 (mod L).
inline IntField invert_laplacian(const IntField& ell) {
  const std::size_t n = ell.size();
  if (n < 3) throw InvalidLattice("periodic lattice needs L >= 3, got " + std::to_string(n));
  const auto L = static_cast<std::int64_t>(n);
  std::int64_t total = 0;
  std::int64_t moment = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += ell.values()[i];
    moment = (moment + static_cast<std::int64_t>(i) * ell.values()[i]) % L;
  }
  if (total != 0) throw SumNonzeroError("laplacian image must sum to zero, got " + std::to_string(total));
  if (moment != 0) throw DivisibilityError("sum of i*ell_i is not divisible by L");

  // L (m_0 - m_1) = sum_{i=1}^{L-1} (L - i) ell_i, then march the recurrence.
  std::int64_t weighted = 0;
  for (std::size_t i = 1; i < n; ++i) weighted += (L - static_cast<std::int64_t>(i)) * ell.values()[i];
  IntField m(n);
  m[0] = 0;
  m[1] = -weighted / L;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const auto s = static_cast<Site>(i);
    m[s + 1] = 2 * m[s] - m[s - 1] + ell[s];
  }
  return min_normalized(std::move(m));
}

struct ModelParams {
  std::size_t L = 0;
  double lambda = 0.0;
  double eta = 0.0;
  double F = 0.0;
  // Use the nearest-representative kernel instead of the exact periodized one
  // (an O(eta^L) approximation).
  bool truncated_kernel = false;

  static double eta_of(double lambda) {
    return 2.0 / (2.0 + lambda + std::sqrt(lambda * lambda + 4.0 * lambda));
  }

  static ModelParams make(std::size_t L, double lambda, double F = 0.0, bool truncated = false) {
    if (L < 3) throw InvalidLattice("periodic lattice needs L >= 3, got " + std::to_string(L));
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive and finite");
    if (!(F >= 0.0) || !std::isfinite(F)) throw DomainError("force must be nonnegative and finite");
    return ModelParams{L, lambda, eta_of(lambda), F, truncated};
  }
};

// Quenched phases alpha and everything derived from them.
struct Disorder {
  RealField alpha;
  RealField delta_alpha;            // periodic Laplacian of alpha
  IntField rounded;                 // nearest_integer(delta_alpha_i)
  RealField omega;                  // delta_alpha - rounded, in (-1/2, 1/2]
  std::int64_t S = 0;               // sum of rounded
  std::vector<std::size_t> sigma;   // omega ascending, ties by smaller index
  std::vector<std::size_t> rank;    // inverse permutation of sigma

  std::size_t size() const noexcept { return alpha.size(); }

  static Disorder from_alpha(RealField alpha) {
    Disorder d;
    d.delta_alpha = periodic_laplacian(alpha);
    d.alpha = std::move(alpha);
    const std::size_t n = d.alpha.size();
    d.rounded = IntField(n);
    d.omega = RealField(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = static_cast<Site>(i);
      d.rounded[s] = nearest_integer(d.delta_alpha[s]);
      d.omega[s] = d.delta_alpha[s] - static_cast<double>(d.rounded[s]);
      d.S += d.rounded[s];
    }
    d.sigma.resize(n);
    std::iota(d.sigma.begin(), d.sigma.end(), std::size_t{0});
    std::stable_sort(d.sigma.begin(), d.sigma.end(), [&](std::size_t a, std::size_t b) {
      return d.omega.values()[a] < d.omega.values()[b];
    });
    d.rank.resize(n);
    for (std::size_t r = 0; r < n; ++r) d.rank[d.sigma[r]] = r;
    return d;
  }
};

// Per-realization seed derived from a campaign seed; independent of the order
// in which realizations are scheduled.
inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Uniform on the open interval (-1/2, 1/2), bit-reproducible across platforms.
inline double uniform_open_half(std::mt19937_64& rng) {
  for (;;) {
    const std::uint64_t bits = rng() >> 11;
    if (bits != 0) return static_cast<double>(bits) * 0x1.0p-53 - 0.5;
  }
}

inline Disorder gen_disorder(std::uint64_t seed, std::size_t L) {
  if (L < 3) throw InvalidLattice("periodic lattice needs L >= 3, got " + std::to_string(L));
  std::mt19937_64 rng(seed);
  RealField alpha(L);
  for (auto& a : alpha) a = uniform_open_half(rng);
  return Disorder::from_alpha(std::move(alpha));
}

}  // namespace cdw

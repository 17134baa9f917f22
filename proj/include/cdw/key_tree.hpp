#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace cdw {

// Segment tree over integer keys: argmax, point update, and nearest index
// (to the left or right within a range) whose key is below a threshold.
class KeyTree {
 public:
  using Key = std::int64_t;

  KeyTree() = default;
  explicit KeyTree(const std::vector<Key>& keys) : n_(keys.size()) {
    size_ = 1;
    while (size_ < n_) size_ *= 2;
    lo_.assign(2 * size_, std::numeric_limits<Key>::max());
    hi_.assign(2 * size_, std::numeric_limits<Key>::min());
    at_.assign(2 * size_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      lo_[size_ + i] = hi_[size_ + i] = keys[i];
      at_[size_ + i] = i;
    }
    for (std::size_t v = size_ - 1; v >= 1; --v) pull(v);
  }

  std::size_t size() const noexcept { return n_; }
  Key key(std::size_t i) const noexcept { return lo_[size_ + i]; }
  std::size_t argmax() const noexcept { return at_[1]; }
  Key max() const noexcept { return hi_[1]; }

  void set(std::size_t i, Key k) {
    std::size_t v = size_ + i;
    lo_[v] = hi_[v] = k;
    for (v /= 2; v >= 1; v /= 2) pull(v);
  }

  // Largest index in [lo, hi) with key < thr.
  std::optional<std::size_t> last_below(std::size_t lo, std::size_t hi, Key thr) const {
    if (lo >= hi) return std::nullopt;
    return last_below(1, 0, size_, lo, hi, thr);
  }

  // Smallest index in [lo, hi) with key < thr.
  std::optional<std::size_t> first_below(std::size_t lo, std::size_t hi, Key thr) const {
    if (lo >= hi) return std::nullopt;
    return first_below(1, 0, size_, lo, hi, thr);
  }

 private:
  void pull(std::size_t v) {
    lo_[v] = std::min(lo_[2 * v], lo_[2 * v + 1]);
    if (hi_[2 * v] >= hi_[2 * v + 1]) {
      hi_[v] = hi_[2 * v];
      at_[v] = at_[2 * v];
    } else {
      hi_[v] = hi_[2 * v + 1];
      at_[v] = at_[2 * v + 1];
    }
  }

  std::optional<std::size_t> last_below(std::size_t v, std::size_t a, std::size_t b, std::size_t lo,
                                        std::size_t hi, Key thr) const {
    if (b <= lo || hi <= a || lo_[v] >= thr) return std::nullopt;
    if (b - a == 1) return a;
    const std::size_t mid = (a + b) / 2;
    if (auto r = last_below(2 * v + 1, mid, b, lo, hi, thr)) return r;
    return last_below(2 * v, a, mid, lo, hi, thr);
  }

  std::optional<std::size_t> first_below(std::size_t v, std::size_t a, std::size_t b, std::size_t lo,
                                         std::size_t hi, Key thr) const {
    if (b <= lo || hi <= a || lo_[v] >= thr) return std::nullopt;
    if (b - a == 1) return a;
    const std::size_t mid = (a + b) / 2;
    if (auto r = first_below(2 * v, a, mid, lo, hi, thr)) return r;
    return first_below(2 * v + 1, mid, b, lo, hi, thr);
  }

  std::size_t n_ = 0;
  std::size_t size_ = 1;
  std::vector<Key> lo_;
  std::vector<Key> hi_;
  std::vector<std::size_t> at_;
};

}  // namespace cdw

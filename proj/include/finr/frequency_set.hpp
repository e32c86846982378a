#pragma once

#include <algorithm>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "finr/errors.hpp"

namespace finr {

enum class FreqKind { sampling, features };
enum class FreqNorm { inf, one };

/// Ordered set of integer frequency vectors. Rows are kept in
/// lexicographic order, which is the canonical iteration order used by
/// every serializer and solver in the library.
///
/// kind = sampling: symmetric (k in set => -k in set) and contains 0.
/// kind = features: no zero vector and at most one of each {k,-k} pair.
class FrequencySet {
 public:
  FrequencySet() = default;

  FrequencySet(int dim, FreqKind kind, std::vector<int> flat) : dim_(dim), kind_(kind), flat_(std::move(flat)) {
    if (dim_ < 1) throw ConfigError("FrequencySet: dim must be >= 1");
    if (flat_.size() % static_cast<std::size_t>(dim_) != 0)
      throw ConfigError("FrequencySet: flat size not a multiple of dim");
    sort_rows();
    validate();
  }

  /// All k with ||k|| <= K for sampling; one representative per +-pair
  /// (first nonzero coordinate positive), zero excluded, for features.
  static FrequencySet box(int max_freq, FreqNorm norm, int dim, FreqKind kind) {
    if (max_freq < 0) throw ConfigError("build_box_freqs: K must be >= 0");
    if (dim < 1) throw ConfigError("build_box_freqs: dim must be >= 1");
    if (kind == FreqKind::features && max_freq == 0)
      throw ConfigError("build_box_freqs: features set with K=0 would be empty");
    std::vector<int> flat;
    std::vector<int> k(static_cast<std::size_t>(dim), -max_freq);
    for (;;) {
      const int n1 = norm_one(k);
      const bool inside = (norm == FreqNorm::inf) ? true : (n1 <= max_freq);
      if (inside) {
        if (kind == FreqKind::sampling) {
          flat.insert(flat.end(), k.begin(), k.end());
        } else if (n1 != 0 && first_nonzero_positive(k)) {
          flat.insert(flat.end(), k.begin(), k.end());
        }
      }
      int axis = dim - 1;
      while (axis >= 0 && k[static_cast<std::size_t>(axis)] == max_freq) {
        k[static_cast<std::size_t>(axis)] = -max_freq;
        --axis;
      }
      if (axis < 0) break;
      ++k[static_cast<std::size_t>(axis)];
    }
    return FrequencySet(dim, kind, std::move(flat));
  }

  int dim() const { return dim_; }
  FreqKind kind() const { return kind_; }
  std::size_t size() const { return flat_.size() / static_cast<std::size_t>(dim_); }

  std::span<const int> at(std::size_t i) const {
    return {flat_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

  /// Index of k in canonical order, or -1 if absent.
  std::ptrdiff_t index_of(std::span<const int> k) const {
    std::size_t lo = 0, hi = size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      const int c = compare(at(mid), k);
      if (c == 0) return static_cast<std::ptrdiff_t>(mid);
      if (c < 0)
        lo = mid + 1;
      else
        hi = mid;
    }
    return -1;
  }

  bool contains(std::span<const int> k) const { return index_of(k) >= 0; }

  int max_inf_norm() const {
    int m = 0;
    for (int v : flat_) m = std::max(m, std::abs(v));
    return m;
  }

  bool operator==(const FrequencySet& o) const { return dim_ == o.dim_ && flat_ == o.flat_; }

  /// Minkowski sum of supports; result is a sampling set when both
  /// inputs are symmetric-with-zero.
  friend FrequencySet minkowski_sum(const FrequencySet& a, const FrequencySet& b) {
    if (a.dim() != b.dim()) throw ConfigError("minkowski_sum: dim mismatch");
    const int d = a.dim();
    std::vector<int> flat;
    flat.reserve(a.flat_.size() * b.size());
    std::vector<int> tmp(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) {
        auto ka = a.at(i);
        auto kb = b.at(j);
        for (int c = 0; c < d; ++c) tmp[static_cast<std::size_t>(c)] = ka[static_cast<std::size_t>(c)] + kb[static_cast<std::size_t>(c)];
        flat.insert(flat.end(), tmp.begin(), tmp.end());
      }
    }
    dedup_rows(flat, d);
    return FrequencySet(d, FreqKind::sampling, std::move(flat));
  }

 private:
  static int norm_one(const std::vector<int>& k) {
    int s = 0;
    for (int v : k) s += std::abs(v);
    return s;
  }

  static bool first_nonzero_positive(const std::vector<int>& k) {
    for (int v : k) {
      if (v > 0) return true;
      if (v < 0) return false;
    }
    return false;
  }

  static int compare(std::span<const int> a, std::span<const int> b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
    }
    return 0;
  }

  static void dedup_rows(std::vector<int>& flat, int dim) {
    const std::size_t d = static_cast<std::size_t>(dim);
    const std::size_t n = flat.size() / d;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return std::lexicographical_compare(flat.begin() + static_cast<std::ptrdiff_t>(x * d),
                                          flat.begin() + static_cast<std::ptrdiff_t>((x + 1) * d),
                                          flat.begin() + static_cast<std::ptrdiff_t>(y * d),
                                          flat.begin() + static_cast<std::ptrdiff_t>((y + 1) * d));
    });
    std::vector<int> out;
    out.reserve(flat.size());
    for (std::size_t idx = 0; idx < n; ++idx) {
      const std::size_t i = order[idx];
      const bool dup = idx > 0 && std::equal(flat.begin() + static_cast<std::ptrdiff_t>(i * d),
                                             flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * d),
                                             flat.begin() + static_cast<std::ptrdiff_t>(order[idx - 1] * d));
      if (!dup) out.insert(out.end(), flat.begin() + static_cast<std::ptrdiff_t>(i * d),
                           flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    }
    flat = std::move(out);
  }

  void sort_rows() {
    std::vector<int> copy = flat_;
    dedup_rows(copy, dim_);
    if (copy.size() != flat_.size()) throw ConfigError("FrequencySet: duplicate frequency");
    flat_ = std::move(copy);
  }

  void validate() const {
    const std::size_t n = size();
    std::vector<int> neg(static_cast<std::size_t>(dim_));
    bool has_zero = false;
    for (std::size_t i = 0; i < n; ++i) {
      auto k = at(i);
      bool zero = true;
      for (int c = 0; c < dim_; ++c) {
        neg[static_cast<std::size_t>(c)] = -k[static_cast<std::size_t>(c)];
        if (k[static_cast<std::size_t>(c)] != 0) zero = false;
      }
      if (zero) has_zero = true;
      if (kind_ == FreqKind::sampling) {
        if (!zero && index_of(neg) < 0) throw ConfigError("FrequencySet(sampling): not symmetric");
      } else {
        if (zero) throw ConfigError("FrequencySet(features): contains zero frequency");
        if (index_of(neg) >= 0) throw ConfigError("FrequencySet(features): contains a +- pair");
      }
    }
    if (kind_ == FreqKind::sampling && !has_zero) throw ConfigError("FrequencySet(sampling): missing zero frequency");
  }

  int dim_ = 2;
  FreqKind kind_ = FreqKind::sampling;
  std::vector<int> flat_;
};

inline FrequencySet build_box_freqs(int max_freq, FreqNorm norm, int dim, FreqKind kind) {
  return FrequencySet::box(max_freq, norm, dim, kind);
}

}  // namespace finr

#pragma once

#include <cflab/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace cflab {

/// Closed interval of admissible votes.
struct Scale {
  double min = 0.0;
  double max = 1.0;

  double range() const noexcept { return std::abs(max - min); }
  double midpoint() const noexcept { return 0.5 * (min + max); }
  bool contains(double v) const noexcept { return v >= min && v <= max; }
  double clamp(double v) const noexcept { return std::clamp(v, min, max); }

  friend bool operator==(const Scale&, const Scale&) = default;
};

struct Rating {
  std::size_t user = 0;
  std::size_t item = 0;
  double vote = 0.0;
};

/// One stored vote seen from a row (index = item) or a column (index = user).
struct Entry {
  std::size_t index = 0;
  double vote = 0.0;
};

/// Aggregates over the votes of one user or one item. `mean` is empty when
/// no vote has been expressed.
struct VoteStats {
  std::optional<double> mean;
  std::size_t vote_count = 0;
};

using UserStats = VoteStats;
using ItemStats = VoteStats;

/// Sparse users x items vote store. A pair that was never inserted is EMPTY;
/// no sentinel value is ever stored.
class RatingMatrix {
public:
  RatingMatrix() = default;

  RatingMatrix(std::size_t n_users, std::size_t n_items, Scale scale)
      : n_users_(n_users),
        n_items_(n_items),
        scale_(scale),
        rows_(n_users),
        cols_(n_items),
        user_sum_(n_users, 0.0),
        item_sum_(n_items, 0.0) {
    if (!(scale.min <= scale.max)) {
      throw UsageError("invalid vote scale [" + std::to_string(scale.min) + ", " +
                       std::to_string(scale.max) + "]");
    }
  }

  void insert(std::size_t user, std::size_t item, double vote) {
    if (user >= n_users_ || item >= n_items_) {
      std::ostringstream os;
      os << "pair (" << user << ", " << item << ") outside " << n_users_ << "x" << n_items_
         << " index space";
      throw DataError(os.str());
    }
    if (!scale_.contains(vote) || std::isnan(vote)) {
      std::ostringstream os;
      os << "vote " << vote << " for pair (" << user << ", " << item << ") outside scale ["
         << scale_.min << ", " << scale_.max << "]";
      throw DataError(os.str());
    }
    auto [it, inserted] = lookup_.emplace(key(user, item), vote);
    if (!inserted) {
      std::ostringstream os;
      os << "duplicate vote for pair (" << user << ", " << item << ")";
      throw DataError(os.str());
    }
    rows_[user].push_back({item, vote});
    cols_[item].push_back({user, vote});
    user_sum_[user] += vote;
    item_sum_[item] += vote;
    total_sum_ += vote;
    ++n_entries_;
  }

  void insert(const Rating& r) { insert(r.user, r.item, r.vote); }

  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_items() const noexcept { return n_items_; }
  std::size_t n_entries() const noexcept { return n_entries_; }
  const Scale& scale() const noexcept { return scale_; }

  bool contains(std::size_t user, std::size_t item) const {
    return lookup_.contains(key(user, item));
  }

  std::optional<double> vote(std::size_t user, std::size_t item) const {
    auto it = lookup_.find(key(user, item));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  /// Votes of `user` in insertion order.
  std::span<const Entry> user_votes(std::size_t user) const { return rows_.at(user); }
  /// Votes received by `item` in insertion order.
  std::span<const Entry> item_votes(std::size_t item) const { return cols_.at(item); }

  std::size_t user_count(std::size_t user) const { return rows_.at(user).size(); }
  std::size_t item_count(std::size_t item) const { return cols_.at(item).size(); }

  std::optional<double> user_mean(std::size_t user) const {
    const auto n = user_count(user);
    if (n == 0) return std::nullopt;
    return user_sum_[user] / static_cast<double>(n);
  }

  std::optional<double> item_mean(std::size_t item) const {
    const auto n = item_count(item);
    if (n == 0) return std::nullopt;
    return item_sum_[item] / static_cast<double>(n);
  }

  std::optional<double> global_mean() const {
    if (n_entries_ == 0) return std::nullopt;
    return total_sum_ / static_cast<double>(n_entries_);
  }

  UserStats user_stats(std::size_t user) const { return {user_mean(user), user_count(user)}; }
  ItemStats item_stats(std::size_t item) const { return {item_mean(item), item_count(item)}; }

  /// Every stored vote, user-major, row entries in insertion order.
  std::vector<Rating> ratings() const {
    std::vector<Rating> out;
    out.reserve(n_entries_);
    for (std::size_t u = 0; u < n_users_; ++u)
      for (const auto& e : rows_[u]) out.push_back({u, e.index, e.vote});
    return out;
  }

private:
  std::uint64_t key(std::size_t user, std::size_t item) const noexcept {
    return static_cast<std::uint64_t>(user) * static_cast<std::uint64_t>(n_items_) + item;
  }

  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::size_t n_entries_ = 0;
  Scale scale_{};
  std::vector<std::vector<Entry>> rows_;
  std::vector<std::vector<Entry>> cols_;
  std::vector<double> user_sum_;
  std::vector<double> item_sum_;
  double total_sum_ = 0.0;
  std::unordered_map<std::uint64_t, double> lookup_;
};

inline RatingMatrix build_matrix(std::span<const Rating> triples, std::size_t n_users,
                                 std::size_t n_items, Scale scale) {
  RatingMatrix m(n_users, n_items, scale);
  for (const auto& r : triples) m.insert(r);
  return m;
}

/// Index space is sized to the largest user and item ids present.
inline RatingMatrix build_matrix(std::span<const Rating> triples, Scale scale) {
  std::size_t n_users = 0, n_items = 0;
  for (const auto& r : triples) {
    n_users = std::max(n_users, r.user + 1);
    n_items = std::max(n_items, r.item + 1);
  }
  return build_matrix(triples, n_users, n_items, scale);
}

/// Fraction of expressed votes, n / (N M).
inline double sparsity(const RatingMatrix& m) {
  const double cells = static_cast<double>(m.n_users()) * static_cast<double>(m.n_items());
  if (cells == 0.0) throw UndefinedStatistic("sparsity of a matrix with no cells");
  return static_cast<double>(m.n_entries()) / cells;
}

/// Bin of `vote` among `bins` equal-width bins spanning the scale; the upper
/// edge belongs to the last bin.
inline std::size_t vote_bin(double vote, const Scale& scale, std::size_t bins) {
  if (scale.range() == 0.0) return 0;
  const double t = (vote - scale.min) / scale.range();
  const auto b = static_cast<std::ptrdiff_t>(std::floor(t * static_cast<double>(bins)));
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1));
}

/// Normalized Shannon entropy of the vote histogram, -sum p log_bins p, in [0, 1].
inline double vote_entropy(const RatingMatrix& m, std::size_t bins = 5) {
  if (bins < 2) throw UsageError("vote_entropy needs at least 2 bins");
  if (m.n_entries() == 0) throw UndefinedStatistic("vote entropy of an empty matrix");
  std::vector<std::size_t> hist(bins, 0);
  for (std::size_t u = 0; u < m.n_users(); ++u)
    for (const auto& e : m.user_votes(u)) ++hist[vote_bin(e.vote, m.scale(), bins)];
  const double n = static_cast<double>(m.n_entries());
  const double log_base = std::log(static_cast<double>(bins));
  double s = 0.0;
  for (auto c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    s -= p * std::log(p) / log_base;
  }
  return std::max(0.0, s);
}

}  // namespace cflab

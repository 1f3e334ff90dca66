#pragma once

#include <cflab/error.hpp>
#include <cflab/ratings.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cflab {

struct TimedTriple {
  std::size_t user = 0;
  std::size_t item = 0;
  double vote = 0.0;
  std::optional<std::int64_t> timestamp;

  Rating rating() const noexcept { return {user, item, vote}; }
  friend bool operator==(const TimedTriple&, const TimedTriple&) = default;
};

/// Parsed ratings plus the index space and scale they live in.
struct Dataset {
  std::vector<TimedTriple> triples;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  Scale scale{};

  bool timed() const noexcept {
    return !triples.empty() && triples.front().timestamp.has_value();
  }
};

inline RatingMatrix build_matrix(const Dataset& ds) {
  RatingMatrix m(ds.n_users, ds.n_items, ds.scale);
  for (const auto& t : ds.triples) m.insert(t.rating());
  return m;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

inline DataError line_error(std::size_t line_no, const std::string& what) {
  return DataError("line " + std::to_string(line_no) + ": " + what);
}

/// Assigns dense ids in order of first appearance.
class DenseIndex {
public:
  std::size_t operator()(std::int64_t raw) {
    auto [it, inserted] = ids_.emplace(raw, ids_.size());
    return it->second;
  }
  std::size_t size() const noexcept { return ids_.size(); }

private:
  std::unordered_map<std::int64_t, std::size_t> ids_;
};

}  // namespace detail

/// MovieLens `ratings.dat`: `UserID::MovieID::Rating::Timestamp`, ratings 1..5.
/// User and movie ids are re-indexed densely from 0 in order of first appearance.
inline Dataset parse_movielens(std::istream& in) {
  Dataset ds;
  ds.scale = {1.0, 5.0};
  detail::DenseIndex users, items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto fields = detail::split_on(text, "::");
    if (fields.size() != 4) throw detail::line_error(line_no, "expected 4 '::'-separated fields");
    const auto uid = detail::parse_number<std::int64_t>(fields[0]);
    const auto mid = detail::parse_number<std::int64_t>(fields[1]);
    const auto vote = detail::parse_number<double>(fields[2]);
    const auto ts = detail::parse_number<std::int64_t>(fields[3]);
    if (!uid || !mid || !vote || !ts) throw detail::line_error(line_no, "non-numeric field");
    if (!ds.scale.contains(*vote))
      throw detail::line_error(line_no, "rating " + std::string(detail::trim(fields[2])) +
                                            " outside scale [1, 5]");
    ds.triples.push_back({users(*uid), items(*mid), *vote, *ts});
  }
  ds.n_users = users.size();
  ds.n_items = items.size();
  return ds;
}

/// Jester per-user CSV: `n_rated, r_1, ..., r_100`, where 99 marks an unrated
/// joke. Row r is user r; column c is joke c - 1. No timestamps.
inline Dataset parse_jester(std::istream& in) {
  constexpr std::size_t kJokes = 100;
  Dataset ds;
  ds.scale = {-10.0, 10.0};
  ds.n_items = kJokes;
  std::string line;
  std::size_t line_no = 0;
  std::size_t user = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto fields = detail::split_on(text, ",");
    if (fields.size() != kJokes + 1)
      throw detail::line_error(line_no, "expected 101 columns, found " +
                                            std::to_string(fields.size()));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const auto vote = detail::parse_number<double>(fields[c]);
      if (!vote) throw detail::line_error(line_no, "non-numeric rating in column " + std::to_string(c));
      if (*vote == 99.0) continue;
      if (!ds.scale.contains(*vote))
        throw detail::line_error(line_no, "rating " + std::string(detail::trim(fields[c])) +
                                              " outside scale [-10, 10]");
      ds.triples.push_back({user, c - 1, *vote, std::nullopt});
    }
    ++user;
  }
  ds.n_users = user;
  return ds;
}

/// Canonical `user_id,item_id,vote[,timestamp]` text. Ids are kept verbatim
/// (non-negative integers); the index space is sized to the largest id. A
/// first line whose first field is not numeric is a header. Without an
/// explicit scale the observed [min, max] vote range is used.
inline Dataset parse_triples(std::istream& in, std::optional<Scale> scale = std::nullopt) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::optional<bool> timed;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto fields = detail::split_on(text, ",");
    if (line_no == 1 && !detail::parse_number<double>(fields[0])) continue;
    if (fields.size() != 3 && fields.size() != 4)
      throw detail::line_error(line_no, "expected 3 or 4 comma-separated fields");
    const auto uid = detail::parse_number<std::int64_t>(fields[0]);
    const auto iid = detail::parse_number<std::int64_t>(fields[1]);
    const auto vote = detail::parse_number<double>(fields[2]);
    if (!uid || !iid || !vote || *uid < 0 || *iid < 0 || !std::isfinite(*vote))
      throw detail::line_error(line_no, "malformed triple");
    std::optional<std::int64_t> ts;
    if (fields.size() == 4) {
      ts = detail::parse_number<std::int64_t>(fields[3]);
      if (!ts) throw detail::line_error(line_no, "malformed timestamp");
    }
    if (timed && *timed != ts.has_value())
      throw detail::line_error(line_no, "timestamps must be present on every line or on none");
    timed = ts.has_value();
    if (scale && !scale->contains(*vote))
      throw detail::line_error(line_no, "vote " + std::string(detail::trim(fields[2])) +
                                            " outside scale");
    lo = std::min(lo, *vote);
    hi = std::max(hi, *vote);
    const auto u = static_cast<std::size_t>(*uid);
    const auto i = static_cast<std::size_t>(*iid);
    ds.n_users = std::max(ds.n_users, u + 1);
    ds.n_items = std::max(ds.n_items, i + 1);
    ds.triples.push_back({u, i, *vote, ts});
  }
  if (scale) {
    ds.scale = *scale;
  } else if (!ds.triples.empty()) {
    ds.scale = {lo, hi};
  }
  return ds;
}

/// Writes the canonical triple format with a header line.
inline void write_triples(std::ostream& out, std::span<const TimedTriple> triples) {
  const bool timed = !triples.empty() && triples.front().timestamp.has_value();
  out << (timed ? "user_id,item_id,vote,timestamp\n" : "user_id,item_id,vote\n");
  out << std::setprecision(17);
  for (const auto& t : triples) {
    out << t.user << ',' << t.item << ',' << t.vote;
    if (timed) out << ',' << t.timestamp.value_or(0);
    out << '\n';
  }
}

enum class SourceFormat { automatic, movielens, jester, triples };

inline SourceFormat parse_source_format(std::string_view name) {
  if (name == "auto") return SourceFormat::automatic;
  if (name == "movielens") return SourceFormat::movielens;
  if (name == "jester") return SourceFormat::jester;
  if (name == "triples" || name == "csv") return SourceFormat::triples;
  throw UsageError("unknown source format '" + std::string(name) + "'");
}

/// `.dat` files are MovieLens; `.csv` files whose first record has 101
/// fields are Jester; anything else is the canonical triple format.
inline SourceFormat detect_format(const std::filesystem::path& path) {
  if (path.extension() == ".dat") return SourceFormat::movielens;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    return detail::split_on(text, ",").size() == 101 ? SourceFormat::jester
                                                      : SourceFormat::triples;
  }
  return SourceFormat::triples;
}

inline Dataset load_dataset(const std::filesystem::path& path,
                            SourceFormat format = SourceFormat::automatic,
                            std::optional<Scale> scale = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  if (format == SourceFormat::automatic) format = detect_format(path);
  try {
    switch (format) {
      case SourceFormat::movielens: return parse_movielens(in);
      case SourceFormat::jester: return parse_jester(in);
      default: return parse_triples(in, scale);
    }
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

namespace detail {

inline Dataset keep_subset(const Dataset& ds, const std::vector<bool>& keep_user,
                           const std::vector<bool>& keep_item) {
  std::vector<std::size_t> user_map(ds.n_users), item_map(ds.n_items);
  Dataset out;
  out.scale = ds.scale;
  for (std::size_t u = 0; u < ds.n_users; ++u)
    if (keep_user[u]) user_map[u] = out.n_users++;
  for (std::size_t i = 0; i < ds.n_items; ++i)
    if (keep_item[i]) item_map[i] = out.n_items++;
  for (const auto& t : ds.triples) {
    if (!keep_user[t.user] || !keep_item[t.item]) continue;
    out.triples.push_back({user_map[t.user], item_map[t.item], t.vote, t.timestamp});
  }
  if (out.triples.empty()) throw DataError("reduction left no votes");
  return out;
}

inline std::vector<bool> choose_exact(std::size_t n, std::size_t keep, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<bool> mask(n, false);
  for (std::size_t k = 0; k < keep; ++k) mask[idx[k]] = true;
  return mask;
}

}  // namespace detail

/// Keeps each user with probability `user_fraction` and each item with
/// probability `item_fraction`, independently; surviving votes are those
/// whose user and item both survive. Ids are re-indexed densely, order kept.
inline Dataset reduce_dataset(const Dataset& ds, double user_fraction, double item_fraction,
                              std::uint64_t seed) {
  if (!(user_fraction > 0.0 && user_fraction <= 1.0) ||
      !(item_fraction > 0.0 && item_fraction <= 1.0))
    throw UsageError("reduction fractions must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep_u(user_fraction), keep_i(item_fraction);
  std::vector<bool> users(ds.n_users), items(ds.n_items);
  for (std::size_t u = 0; u < ds.n_users; ++u) users[u] = keep_u(rng);
  for (std::size_t i = 0; i < ds.n_items; ++i) items[i] = keep_i(rng);
  return detail::keep_subset(ds, users, items);
}

/// Exact-count variant: keeps a uniformly random set of exactly `n_users`
/// users and `n_items` items.
inline Dataset reduce_to_shape(const Dataset& ds, std::size_t n_users, std::size_t n_items,
                               std::uint64_t seed) {
  if (n_users == 0 || n_users > ds.n_users || n_items == 0 || n_items > ds.n_items)
    throw UsageError("target shape " + std::to_string(n_users) + "x" + std::to_string(n_items) +
                     " not within " + std::to_string(ds.n_users) + "x" +
                     std::to_string(ds.n_items));
  std::mt19937_64 rng(seed);
  auto users = detail::choose_exact(ds.n_users, n_users, rng);
  auto items = detail::choose_exact(ds.n_items, n_items, rng);
  return detail::keep_subset(ds, users, items);
}

enum class SplitMode { temporal, random };

struct SplitPlan {
  SplitMode mode = SplitMode::random;
  std::size_t n_test = 10000;
  std::uint64_t seed = 1;
  std::vector<double> checkpoints;  // target sparsities, strictly increasing
};

struct Split {
  std::vector<TimedTriple> train;  // fill order
  std::vector<TimedTriple> test;
};

/// Temporal: stable sort by timestamp, the last `n_test` votes are the test
/// set. Random: a seeded shuffle; the first `n_test` are the test set and the
/// rest, in shuffled order, the training stream.
inline Split split(std::span<const TimedTriple> triples, const SplitPlan& plan) {
  if (plan.n_test == 0) throw UsageError("n_test must be at least 1");
  if (plan.n_test >= triples.size())
    throw DataError("n_test = " + std::to_string(plan.n_test) + " leaves no training votes out of " +
                    std::to_string(triples.size()));
  std::vector<TimedTriple> order(triples.begin(), triples.end());
  Split s;
  if (plan.mode == SplitMode::temporal) {
    for (const auto& t : order)
      if (!t.timestamp) throw DataError("temporal split requires timestamps on every vote");
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return *a.timestamp < *b.timestamp;
    });
    const auto cut = order.size() - plan.n_test;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
  } else {
    std::mt19937_64 rng(plan.seed);
    std::shuffle(order.begin(), order.end(), rng);
    s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(plan.n_test));
    s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(plan.n_test), order.end());
  }
  return s;
}

/// Number of stored votes needed to reach sparsity `eta` in `cells` cells.
inline std::size_t votes_for_sparsity(double eta, std::size_t cells) {
  const double exact = eta * static_cast<double>(cells);
  return static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
}

/// Single-shot form: inserts votes from `train[cursor...]` into `matrix`
/// until its sparsity reaches `eta`; `cursor` is advanced past consumed votes.
inline RatingMatrix& fill_to_checkpoint(std::span<const TimedTriple> train, std::size_t& cursor,
                                        RatingMatrix& matrix, double eta) {
  const auto target = votes_for_sparsity(eta, matrix.n_users() * matrix.n_items());
  while (matrix.n_entries() < target) {
    if (cursor == train.size()) {
      std::ostringstream os;
      os << "training set exhausted at sparsity " << sparsity(matrix) << " before target " << eta;
      throw DataError(os.str());
    }
    matrix.insert(train[cursor++].rating());
  }
  return matrix;
}

/// Streams a training sequence into a matrix in order.
class ProgressiveFill {
public:
  ProgressiveFill(std::vector<TimedTriple> train, std::size_t n_users, std::size_t n_items,
                  Scale scale)
      : train_(std::move(train)), matrix_(n_users, n_items, scale) {}

  /// Appends votes until sparsity >= eta. Throws DataError when the training
  /// stream runs out first.
  const RatingMatrix& fill_to(double eta) {
    fill_to_checkpoint(train_, cursor_, matrix_, eta);
    return matrix_;
  }

  const RatingMatrix& matrix() const noexcept { return matrix_; }
  std::size_t consumed() const noexcept { return cursor_; }
  std::size_t available() const noexcept { return train_.size(); }

  /// Sparsity reached once every training vote is in.
  double final_sparsity() const {
    return static_cast<double>(train_.size()) /
           (static_cast<double>(matrix_.n_users()) * static_cast<double>(matrix_.n_items()));
  }

private:
  std::vector<TimedTriple> train_;
  RatingMatrix matrix_;
  std::size_t cursor_ = 0;
};

/// `count` geometrically spaced sparsities from `lo_fraction * eta_final`
/// up to `eta_final`.
inline std::vector<double> geometric_checkpoints(double eta_final, std::size_t count = 15,
                                                 double lo_fraction = 0.02) {
  if (count == 0) throw UsageError("at least one checkpoint is required");
  if (count == 1) return {eta_final};
  std::vector<double> out(count);
  const double lo = std::log(lo_fraction * eta_final), hi = std::log(eta_final);
  for (std::size_t c = 0; c < count; ++c)
    out[c] = std::exp(lo + (hi - lo) * static_cast<double>(c) / static_cast<double>(count - 1));
  out.back() = eta_final;
  return out;
}

}  // namespace cflab

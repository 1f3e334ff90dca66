#pragma once

#include <cflab/baselines.hpp>
#include <cflab/correlation.hpp>
#include <cflab/error.hpp>
#include <cflab/ratings.hpp>
#include <cflab/similarity.hpp>
#include <cflab/spectral.hpp>

#include <charconv>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cflab {

/// A method name plus its parameters, written `name` or
/// `name:key=value;key=value`, e.g. `correlation:n_c=3;gamma=2`.
struct MethodSpec {
  std::string name;
  std::map<std::string, std::string> params;

  /// Canonical text form; parameters in key order.
  std::string label() const {
    std::string s = name;
    char sep = ':';
    for (const auto& [k, v] : params) {
      s += sep;
      s += k + "=" + v;
      sep = ';';
    }
    return s;
  }
};

namespace detail {

inline std::string trimmed(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(ws) - b + 1));
}

inline double param_double(const MethodSpec& m, const std::string& key, double fallback) {
  auto it = m.params.find(key);
  if (it == m.params.end()) return fallback;
  double v{};
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw UsageError("method " + m.name + ": parameter " + key + "='" + s + "' is not a number");
  return v;
}

inline std::size_t param_count(const MethodSpec& m, const std::string& key, std::size_t fallback) {
  auto it = m.params.find(key);
  if (it == m.params.end()) return fallback;
  std::size_t v{};
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw UsageError("method " + m.name + ": parameter " + key + "='" + s + "' is not a count");
  return v;
}

inline void check_keys(const MethodSpec& m, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : m.params) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) throw UsageError("method " + m.name + " has no parameter '" + k + "'");
  }
}

}  // namespace detail

inline MethodSpec parse_method(std::string_view text) {
  MethodSpec m;
  const auto colon = text.find(':');
  m.name = detail::trimmed(text.substr(0, colon));
  if (m.name.empty()) throw UsageError("empty method name");
  if (colon != std::string_view::npos) {
    auto rest = text.substr(colon + 1);
    while (!rest.empty()) {
      const auto semi = rest.find(';');
      const auto item = rest.substr(0, semi);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos)
        throw UsageError("method parameter '" + std::string(item) + "' is not key=value");
      m.params[detail::trimmed(item.substr(0, eq))] = detail::trimmed(item.substr(eq + 1));
      if (semi == std::string_view::npos) break;
      rest = rest.substr(semi + 1);
    }
  }
  return m;
}

/// Comma-separated list of method specs.
inline std::vector<MethodSpec> parse_methods(std::string_view text) {
  std::vector<MethodSpec> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = detail::trimmed(text.substr(pos, comma - pos));
    if (!item.empty()) out.push_back(parse_method(item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw UsageError("no methods given");
  return out;
}

/// Predictor fitted on one training matrix. The matrix must outlive it.
class Model {
public:
  virtual ~Model() = default;
  virtual Prediction predict(std::size_t user, std::size_t item) const = 0;
  /// Free-form notes for the report, e.g. the selected k.
  virtual std::string notes() const { return {}; }
};

class ItemMeanModel final : public Model {
public:
  explicit ItemMeanModel(const RatingMatrix& m) : m_(m) {}
  Prediction predict(std::size_t u, std::size_t i) const override { return predict_item_mean(m_, u, i); }

private:
  const RatingMatrix& m_;
};

class UserMeanModel final : public Model {
public:
  explicit UserMeanModel(const RatingMatrix& m) : m_(m) {}
  Prediction predict(std::size_t u, std::size_t i) const override { return predict_user_mean(m_, u, i); }

private:
  const RatingMatrix& m_;
};

class BlendModel final : public Model {
public:
  BlendModel(const RatingMatrix& m, double q, std::size_t min_overlap)
      : m_(m), q_(q), raw_(raw_similarity(m, min_overlap)) {
    if (!(q >= 0.0 && q <= 1.0)) throw UsageError("blend weight q must lie in [0, 1]");
  }
  Prediction predict(std::size_t u, std::size_t i) const override {
    return predict_blend(m_, raw_, u, i, q_);
  }

private:
  const RatingMatrix& m_;
  double q_;
  SimilarityMatrix raw_;
};

/// Any method that reduces to the weighted predictor over a fixed S.
class WeightedModel final : public Model {
public:
  WeightedModel(const RatingMatrix& m, SimilarityMatrix s, std::string notes = {})
      : m_(m), s_(std::move(s)), notes_(std::move(notes)) {}
  Prediction predict(std::size_t u, std::size_t i) const override { return predict_weighted(m_, s_, u, i); }
  std::string notes() const override { return notes_; }
  const SimilarityMatrix& similarity() const noexcept { return s_; }

private:
  const RatingMatrix& m_;
  SimilarityMatrix s_;
  std::string notes_;
};

inline const std::vector<std::size_t>& default_k_candidates() {
  static const std::vector<std::size_t> ks{2, 3, 4, 6, 8, 10, 12, 16, 20};
  return ks;
}

inline CorrelationOptions correlation_options(const MethodSpec& spec) {
  detail::check_keys(spec, {"n_c", "gamma", "mean_field", "centering"});
  CorrelationOptions opt;
  opt.min_overlap = detail::param_count(spec, "n_c", opt.min_overlap);
  opt.gamma = detail::param_double(spec, "gamma", opt.gamma);
  if (auto it = spec.params.find("mean_field"); it != spec.params.end()) {
    if (it->second != "0" && it->second != "1")
      throw UsageError("correlation: mean_field must be 0 or 1");
    opt.mean_field = it->second == "1";
  }
  if (auto it = spec.params.find("centering"); it != spec.params.end()) {
    if (it->second == "global")
      opt.centering = Centering::global;
    else if (it->second == "overlap")
      opt.centering = Centering::overlap;
    else
      throw UsageError("correlation: centering must be global or overlap");
  }
  return opt;
}

inline SpectralOptions spectral_options(const MethodSpec& spec) {
  detail::check_keys(spec, {"k", "kernel", "width", "center", "holdout"});
  SpectralOptions opt;
  if (auto it = spec.params.find("kernel"); it != spec.params.end()) {
    if (it->second == "quadratic")
      opt.kernel = Kernel::quadratic;
    else if (it->second == "gaussian")
      opt.kernel = Kernel::gaussian;
    else
      throw UsageError("spectral: kernel must be quadratic or gaussian");
  }
  if (spec.params.contains("width")) opt.width = detail::param_double(spec, "width", 0.0);
  if (auto it = spec.params.find("center"); it != spec.params.end()) opt.center_users = it->second == "1";
  if (auto it = spec.params.find("k"); it != spec.params.end() && it->second != "auto")
    opt.k = detail::param_count(spec, "k", opt.k);
  return opt;
}

/// Fits `spec` on `m`. `seed` drives any internal randomness (k selection).
inline std::unique_ptr<Model> fit_model(const MethodSpec& spec, const RatingMatrix& m,
                                        std::uint64_t seed = 1) {
  if (spec.name == "item_mean") {
    detail::check_keys(spec, {});
    return std::make_unique<ItemMeanModel>(m);
  }
  if (spec.name == "user_mean") {
    detail::check_keys(spec, {});
    return std::make_unique<UserMeanModel>(m);
  }
  if (spec.name == "blend") {
    detail::check_keys(spec, {"q", "n_c"});
    return std::make_unique<BlendModel>(m, detail::param_double(spec, "q", 0.5),
                                        detail::param_count(spec, "n_c", 3));
  }
  if (spec.name == "correlation") {
    return std::make_unique<WeightedModel>(m, build_similarity(m, correlation_options(spec)));
  }
  if (spec.name == "spectral") {
    auto opt = spectral_options(spec);
    std::string notes;
    const auto k_it = spec.params.find("k");
    if (k_it != spec.params.end() && k_it->second == "auto") {
      std::vector<std::size_t> candidates;
      for (auto k : default_k_candidates())
        if (k <= m.n_users()) candidates.push_back(k);
      const auto sel = select_k(m, candidates, detail::param_double(spec, "holdout", 0.1), seed, opt);
      opt.k = sel.k;
      notes = "selected_k=" + std::to_string(sel.k);
    }
    return std::make_unique<WeightedModel>(m, build_spectral_similarity(m, opt), notes);
  }
  throw UsageError("unknown method '" + spec.name + "'");
}

}  // namespace cflab

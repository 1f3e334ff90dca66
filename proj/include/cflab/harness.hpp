#pragma once

#include <cflab/error.hpp>
#include <cflab/ingest.hpp>
#include <cflab/metrics.hpp>
#include <cflab/models.hpp>
#include <cflab/ratings.hpp>
#include <cflab/synthetic.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace cflab {

enum class SourceKind { file, synthetic };

struct SourceSpec {
  SourceKind kind = SourceKind::synthetic;
  std::filesystem::path path;
  SourceFormat format = SourceFormat::automatic;
  std::optional<Scale> scale;
  // synthetic
  CorrelationTarget target{};
  std::size_t n_items = 500;
  VoteMode mode = VoteMode::unimodal;
  double offset = 0.0;
  std::uint64_t vote_seed = 1;
};

struct ReductionSpec {
  double user_fraction = 1.0;
  double item_fraction = 1.0;
  std::optional<std::pair<std::size_t, std::size_t>> shape;  // exact (N, M)
  std::uint64_t seed = 1;
};

struct ExperimentPlan {
  SourceSpec source;
  ReductionSpec reduction;
  SplitPlan split;
  std::optional<double> test_fraction;     // overrides split.n_test when set
  std::vector<double> fill_fractions;      // checkpoints as fractions of the full training set
  std::size_t n_checkpoints = 15;          // geometric grid when no explicit checkpoints
  std::vector<MethodSpec> methods;
  bool diagnostics = true;
  std::size_t diagnostic_min_overlap = 3;
};

struct ReportRow {
  std::string method;
  double eta = 0.0;
  double mae = 0.0;
  std::size_t n_predictions = 0;
  std::size_t n_fallbacks = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct CheckpointInfo {
  double eta = 0.0;
  double fill_fraction = 0.0;
  std::size_t n_train = 0;
};

struct SweepReport {
  std::vector<ReportRow> rows;  // ordered by (method, eta)
  std::vector<CheckpointInfo> checkpoints;
  // Ordered key=value diagnostics and provenance.
  std::vector<std::pair<std::string, std::string>> diagnostics;

  const ReportRow* find(std::string_view method, std::size_t checkpoint) const {
    std::size_t seen = 0;
    for (const auto& r : rows)
      if (r.method == method && seen++ == checkpoint) return &r;
    return nullptr;
  }
};

/// Formats with 12 significant digits.
inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// The double that `format_real(v)` reads back as.
inline double round_to_report(double v) { return std::strtod(format_real(v).c_str(), nullptr); }

/// FNV-1a over (user, item, vote bits) of every test vote, in order.
inline std::uint64_t test_set_hash(std::span<const TimedTriple> test) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& t : test) {
    mix(t.user);
    mix(t.item);
    mix(std::bit_cast<std::uint64_t>(t.vote));
  }
  return h;
}

/// Loads (or generates) and reduces the plan's dataset.
inline Dataset load_source(const ExperimentPlan& plan, GeneratorRecord* record = nullptr) {
  Dataset ds;
  const auto& src = plan.source;
  if (src.kind == SourceKind::file) {
    ds = load_dataset(src.path, src.format, src.scale);
  } else {
    auto corr = valid_correlation_matrix(src.target);
    const auto votes = src.mode == VoteMode::bimodal
                           ? sample_votes_bimodal(corr.matrix, src.n_items, src.offset, src.vote_seed)
                           : sample_votes(corr.matrix, src.n_items, src.vote_seed);
    ds = to_dataset(votes);
    if (record) *record = {src.target, src.n_items, src.mode, src.offset, src.vote_seed, std::move(corr)};
  }
  const auto& red = plan.reduction;
  if (red.shape) {
    ds = reduce_to_shape(ds, red.shape->first, red.shape->second, red.seed);
  } else if (red.user_fraction < 1.0 || red.item_fraction < 1.0) {
    ds = reduce_dataset(ds, red.user_fraction, red.item_fraction, red.seed);
  }
  return ds;
}

namespace detail {

/// Rethrows the active library error with `context` prepended, keeping its type.
[[noreturn]] inline void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(context + ": " + e.what(), e.achieved());
  } catch (const UndefinedStatistic& e) {
    throw UndefinedStatistic(context + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(context + ": " + e.what());
  } catch (const UsageError& e) {
    throw UsageError(context + ": " + e.what());
  }
}

inline std::vector<double> resolve_checkpoints(const ExperimentPlan& plan, double eta_final) {
  std::vector<double> etas;
  if (!plan.split.checkpoints.empty()) {
    etas = plan.split.checkpoints;
  } else if (!plan.fill_fractions.empty()) {
    for (double f : plan.fill_fractions) {
      if (!(f > 0.0 && f <= 1.0)) throw UsageError("fill fractions must lie in (0, 1]");
      etas.push_back(f == 1.0 ? eta_final : f * eta_final);
    }
  } else {
    etas = geometric_checkpoints(eta_final, plan.n_checkpoints);
  }
  for (std::size_t c = 0; c < etas.size(); ++c) {
    if (c > 0 && !(etas[c] > etas[c - 1])) throw UsageError("checkpoints must be strictly increasing");
    if (etas[c] > eta_final * (1.0 + 1e-12))
      throw UsageError("checkpoint " + format_real(etas[c]) + " exceeds final training sparsity " +
                       format_real(eta_final));
  }
  return etas;
}

}  // namespace detail

inline SweepReport run_sweep(const ExperimentPlan& plan) {
  if (plan.methods.empty()) throw UsageError("plan has no methods");
  GeneratorRecord record;
  const Dataset ds = load_source(plan, &record);
  if (ds.n_users == 0 || ds.n_items == 0) throw DataError("dataset is empty");
  const double range = ds.scale.range();
  if (!(range > 0.0)) throw DataError("dataset vote range is zero");

  SplitPlan sp = plan.split;
  if (plan.test_fraction) {
    if (!(*plan.test_fraction > 0.0 && *plan.test_fraction < 1.0))
      throw UsageError("test fraction must lie in (0, 1)");
    sp.n_test = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(*plan.test_fraction * static_cast<double>(ds.triples.size()))));
  }
  const auto parts = split(ds.triples, sp);
  ProgressiveFill fill(parts.train, ds.n_users, ds.n_items, ds.scale);
  const double eta_final = fill.final_sparsity();
  const auto etas = detail::resolve_checkpoints(plan, eta_final);

  SweepReport report;
  auto diag = [&report](std::string key, std::string value) {
    report.diagnostics.emplace_back(std::move(key), std::move(value));
  };
  diag("n_users", std::to_string(ds.n_users));
  diag("n_items", std::to_string(ds.n_items));
  diag("n_votes", std::to_string(ds.triples.size()));
  diag("n_train", std::to_string(parts.train.size()));
  diag("n_test", std::to_string(parts.test.size()));
  diag("scale_min", format_real(ds.scale.min));
  diag("scale_max", format_real(ds.scale.max));
  diag("split", sp.mode == SplitMode::temporal ? "temporal" : "random");
  diag("split_seed", std::to_string(sp.seed));
  diag("reduction_seed", std::to_string(plan.reduction.seed));
  diag("test_set_hash", std::to_string(test_set_hash(parts.test)));
  diag("eta_dataset", format_real(static_cast<double>(ds.triples.size()) /
                                  (static_cast<double>(ds.n_users) * static_cast<double>(ds.n_items))));
  diag("eta_final", format_real(eta_final));
  if (plan.source.kind == SourceKind::synthetic) {
    diag("synthetic_mu", format_real(plan.source.target.mean));
    diag("synthetic_sigma", format_real(plan.source.target.std));
    diag("synthetic_matrix_seed", std::to_string(plan.source.target.seed));
    diag("synthetic_vote_seed", std::to_string(plan.source.vote_seed));
    diag("synthetic_mode", plan.source.mode == VoteMode::bimodal ? "bimodal" : "unimodal");
    diag("synthetic_offset", format_real(plan.source.offset));
    diag("synthetic_achieved_mean", format_real(record.achieved.moments.mean));
    diag("synthetic_achieved_std", format_real(record.achieved.moments.std));
    diag("synthetic_iterations", std::to_string(record.achieved.iterations));
  }
  if (plan.diagnostics) {
    const auto full = build_matrix(ds);
    diag("vote_entropy", format_real(vote_entropy(full)));
    try {
      const auto cd = correlation_distribution(full, plan.diagnostic_min_overlap);
      diag("correlation_mean", format_real(cd.mean));
      diag("correlation_std", format_real(cd.std));
      diag("correlation_pairs", std::to_string(cd.n_pairs));
      std::string hist;
      for (std::size_t b = 0; b < cd.histogram.size(); ++b)
        hist += (b ? ";" : "") + std::to_string(cd.histogram[b]);
      diag("correlation_histogram", hist);
    } catch (const UndefinedStatistic&) {
      diag("correlation_mean", "undefined");
    }
  }
  for (const auto& m : plan.methods) diag("method", m.label());

  std::vector<std::vector<ReportRow>> per_method(plan.methods.size());
  for (std::size_t c = 0; c < etas.size(); ++c) {
    const std::string where = "checkpoint eta=" + format_real(etas[c]);
    const RatingMatrix* matrix = nullptr;
    try {
      matrix = &fill.fill_to(etas[c]);
    } catch (const Error&) {
      detail::rethrow_with_context(where);
    }
    const double eta = round_to_report(sparsity(*matrix));
    report.checkpoints.push_back(
        {eta, round_to_report(static_cast<double>(fill.consumed()) / static_cast<double>(fill.available())),
         fill.consumed()});
    for (std::size_t k = 0; k < plan.methods.size(); ++k) {
      const auto& spec = plan.methods[k];
      try {
        const auto model = fit_model(spec, *matrix, sp.seed + c);
        std::vector<PredictionPair> pairs;
        pairs.reserve(parts.test.size());
        std::size_t fallbacks = 0;
        for (const auto& t : parts.test) {
          const auto p = model->predict(t.user, t.item);
          fallbacks += p.fallback ? 1 : 0;
          pairs.push_back({p.value, t.vote});
        }
        per_method[k].push_back(
            {spec.label(), eta, round_to_report(mae(pairs, range)), pairs.size(), fallbacks});
        if (auto notes = model->notes(); !notes.empty())
          diag("notes[" + spec.label() + "@" + format_real(eta) + "]", notes);
      } catch (const Error&) {
        detail::rethrow_with_context(where + ", method " + spec.label());
      }
    }
  }
  for (auto& rows : per_method)
    for (auto& r : rows) report.rows.push_back(std::move(r));
  return report;
}

inline constexpr std::string_view kReportHeader = "method,eta,mae,n_predictions,n_fallbacks";

inline void write_report_csv(std::ostream& out, const SweepReport& report) {
  out << kReportHeader << '\n';
  for (const auto& r : report.rows)
    out << r.method << ',' << format_real(r.eta) << ',' << format_real(r.mae) << ','
        << r.n_predictions << ',' << r.n_fallbacks << '\n';
}

inline void write_diagnostics(std::ostream& out, const SweepReport& report) {
  for (const auto& [k, v] : report.diagnostics) out << k << '=' << v << '\n';
  for (std::size_t c = 0; c < report.checkpoints.size(); ++c) {
    const auto& cp = report.checkpoints[c];
    out << "checkpoint[" << c << "]=eta:" << format_real(cp.eta)
        << ";fill_fraction:" << format_real(cp.fill_fraction) << ";n_train:" << cp.n_train << '\n';
  }
}

/// Companion diagnostics file for a report at `path`.
inline std::filesystem::path diagnostics_path(const std::filesystem::path& path) {
  auto p = path;
  p.replace_extension(".diag.txt");
  return p;
}

inline void emit_report(const SweepReport& report, const std::filesystem::path& path) {
  {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report '" + path.string() + "'");
    write_report_csv(out, report);
    if (!out) throw DataError("failed writing report '" + path.string() + "'");
  }
  const auto dpath = diagnostics_path(path);
  std::ofstream out(dpath);
  if (!out) throw DataError("cannot write diagnostics '" + dpath.string() + "'");
  write_diagnostics(out, report);
  if (!out) throw DataError("failed writing diagnostics '" + dpath.string() + "'");
}

inline std::vector<ReportRow> read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trimmed(line) != kReportHeader)
    throw DataError("report is missing its header");
  std::vector<ReportRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trimmed(line).empty()) continue;
    const auto f = detail::split_on(line, ",");
    if (f.size() != 5) throw detail::line_error(line_no, "expected 5 report fields");
    ReportRow r;
    r.method = std::string(f[0]);
    const auto eta = detail::parse_number<double>(f[1]);
    const auto err = detail::parse_number<double>(f[2]);
    const auto n = detail::parse_number<std::size_t>(f[3]);
    const auto nf = detail::parse_number<std::size_t>(f[4]);
    if (!eta || !err || !n || !nf) throw detail::line_error(line_no, "malformed report row");
    r.eta = *eta;
    r.mae = *err;
    r.n_predictions = *n;
    r.n_fallbacks = *nf;
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// key=value configuration

using Config = std::map<std::string, std::string>;

/// Parses `key=value` lines; `#` starts a comment.
inline Config parse_config(std::istream& in) {
  Config cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = detail::trimmed(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    cfg[detail::trimmed(std::string_view(text).substr(0, eq))] =
        detail::trimmed(std::string_view(text).substr(eq + 1));
  }
  return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

namespace detail {

template <class T>
T config_number(const Config& cfg, const std::string& key, T fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  auto v = parse_number<T>(it->second);
  if (!v) throw UsageError("config " + key + "='" + it->second + "' is not a number");
  return *v;
}

inline std::vector<double> config_reals(const Config& cfg, const std::string& key) {
  std::vector<double> out;
  auto it = cfg.find(key);
  if (it == cfg.end()) return out;
  for (auto f : split_on(it->second, ",")) {
    if (trim(f).empty()) continue;
    auto v = parse_number<double>(f);
    if (!v) throw UsageError("config " + key + " has non-numeric entry '" + std::string(f) + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace detail

/// Builds a plan from configuration keys:
///
///   source=movielens|jester|triples|synthetic   path=<file>   scale=lo,hi
///   users, items, mu, sigma, dist=uniform|gaussian, mode=unimodal|bimodal,
///   offset, matrix_seed, vote_seed, tol_mean, tol_std, max_iter   (synthetic)
///   user_fraction, item_fraction, reduce_users, reduce_items, reduction_seed
///   split=temporal|random, n_test, test_fraction, split_seed
///   checkpoints=eta,...  fill_fractions=f,...  n_checkpoints
///   methods=item_mean,user_mean,blend:q=0.5,correlation:n_c=3,spectral:k=auto
///   diagnostics=0|1, diagnostic_min_overlap
inline ExperimentPlan plan_from_config(const Config& cfg) {
  static const std::vector<std::string> known{
      "source", "path", "scale", "users", "items", "mu", "sigma", "dist", "mode", "offset",
      "matrix_seed", "vote_seed", "tol_mean", "tol_std", "max_iter", "user_fraction",
      "item_fraction", "reduce_users", "reduce_items", "reduction_seed", "split", "n_test",
      "test_fraction", "split_seed", "checkpoints", "fill_fractions", "n_checkpoints", "methods",
      "diagnostics", "diagnostic_min_overlap", "seed"};
  for (const auto& [k, v] : cfg)
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw UsageError("unknown config key '" + k + "'");

  using detail::config_number;
  ExperimentPlan plan;
  const auto get = [&cfg](const std::string& key, std::string fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
  };
  const auto seed = config_number<std::uint64_t>(cfg, "seed", 1);

  const auto source = get("source", "synthetic");
  auto& src = plan.source;
  if (source == "synthetic") {
    src.kind = SourceKind::synthetic;
    src.target.n_users = config_number<std::size_t>(cfg, "users", 250);
    src.n_items = config_number<std::size_t>(cfg, "items", 500);
    src.target.mean = config_number<double>(cfg, "mu", 0.0);
    src.target.std = config_number<double>(cfg, "sigma", 0.1);
    const auto dist = get("dist", "uniform");
    if (dist != "uniform" && dist != "gaussian") throw UsageError("dist must be uniform or gaussian");
    src.target.dist = dist == "uniform" ? SeedDistribution::uniform : SeedDistribution::gaussian;
    src.target.tol_mean = config_number<double>(cfg, "tol_mean", src.target.tol_mean);
    src.target.tol_std = config_number<double>(cfg, "tol_std", src.target.tol_std);
    src.target.max_iter = config_number<std::size_t>(cfg, "max_iter", src.target.max_iter);
    src.target.seed = config_number<std::uint64_t>(cfg, "matrix_seed", seed);
    src.vote_seed = config_number<std::uint64_t>(cfg, "vote_seed", seed + 1000);
    const auto mode = get("mode", "unimodal");
    if (mode != "unimodal" && mode != "bimodal") throw UsageError("mode must be unimodal or bimodal");
    src.mode = mode == "bimodal" ? VoteMode::bimodal : VoteMode::unimodal;
    src.offset = config_number<double>(cfg, "offset", src.mode == VoteMode::bimodal ? 2.0 : 0.0);
  } else {
    src.kind = SourceKind::file;
    src.format = parse_source_format(source == "file" ? "auto" : source);
    if (!cfg.contains("path")) throw UsageError("file sources need path=<file>");
    src.path = get("path", "");
    const auto sc = detail::config_reals(cfg, "scale");
    if (!sc.empty()) {
      if (sc.size() != 2) throw UsageError("scale must be lo,hi");
      src.scale = Scale{sc[0], sc[1]};
    }
  }

  auto& red = plan.reduction;
  red.user_fraction = config_number<double>(cfg, "user_fraction", 1.0);
  red.item_fraction = config_number<double>(cfg, "item_fraction", 1.0);
  if (cfg.contains("reduce_users") || cfg.contains("reduce_items")) {
    if (!cfg.contains("reduce_users") || !cfg.contains("reduce_items"))
      throw UsageError("reduce_users and reduce_items go together");
    red.shape = std::pair{config_number<std::size_t>(cfg, "reduce_users", 0),
                          config_number<std::size_t>(cfg, "reduce_items", 0)};
  }
  red.seed = config_number<std::uint64_t>(cfg, "reduction_seed", seed);

  const auto mode = get("split", "random");
  if (mode != "random" && mode != "temporal") throw UsageError("split must be random or temporal");
  plan.split.mode = mode == "temporal" ? SplitMode::temporal : SplitMode::random;
  plan.split.n_test = config_number<std::size_t>(cfg, "n_test", 10000);
  plan.split.seed = config_number<std::uint64_t>(cfg, "split_seed", seed);
  if (cfg.contains("test_fraction")) plan.test_fraction = config_number<double>(cfg, "test_fraction", 0.2);
  else if (!cfg.contains("n_test") && src.kind == SourceKind::synthetic) plan.test_fraction = 0.2;
  plan.split.checkpoints = detail::config_reals(cfg, "checkpoints");
  plan.fill_fractions = detail::config_reals(cfg, "fill_fractions");
  plan.n_checkpoints = config_number<std::size_t>(cfg, "n_checkpoints", plan.n_checkpoints);
  plan.methods = parse_methods(get("methods", "item_mean,user_mean,correlation"));
  plan.diagnostics = get("diagnostics", "1") != "0";
  plan.diagnostic_min_overlap = config_number<std::size_t>(cfg, "diagnostic_min_overlap", 3);
  return plan;
}

}  // namespace cflab

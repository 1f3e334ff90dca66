// Command-line front end: sweep, gen, diag, predict.

#include <cflab/cflab.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kConvergence = 3 };

std::optional<cflab::Scale> parse_scale(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw cflab::UsageError("--scale expects lo,hi");
  try {
    return cflab::Scale{std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw cflab::UsageError("--scale expects two numbers");
  }
}

int run_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out) {
  cflab::Config cfg;
  if (!config_path.empty()) cfg = cflab::load_config(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw cflab::UsageError("--set expects key=value, got '" + kv + "'");
    cfg[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  const auto report = cflab::run_sweep(cflab::plan_from_config(cfg));
  cflab::emit_report(report, out);
  std::cout << "wrote " << out << " (" << report.rows.size() << " rows) and "
            << cflab::diagnostics_path(out).string() << '\n';
  return kOk;
}

struct GenArgs {
  std::size_t users = 250;
  std::size_t items = 500;
  double mu = 0.0;
  double sigma = 0.1;
  std::optional<double> bimodal;
  std::uint64_t seed = 1;
  std::string dist = "uniform";
  std::string out;
};

int run_gen(const GenArgs& a) {
  cflab::CorrelationTarget t;
  t.n_users = a.users;
  t.mean = a.mu;
  t.std = a.sigma;
  t.seed = a.seed;
  t.dist = a.dist == "gaussian" ? cflab::SeedDistribution::gaussian : cflab::SeedDistribution::uniform;
  auto corr = cflab::valid_correlation_matrix(t);
  const std::uint64_t vote_seed = a.seed + 1000;
  const auto votes = a.bimodal ? cflab::sample_votes_bimodal(corr.matrix, a.items, *a.bimodal, vote_seed)
                               : cflab::sample_votes(corr.matrix, a.items, vote_seed);
  const auto ds = cflab::to_dataset(votes);
  {
    std::ofstream out(a.out);
    if (!out) throw cflab::DataError("cannot write '" + a.out + "'");
    cflab::write_triples(out, ds.triples);
  }
  const auto meta_path = a.out + ".meta";
  std::ofstream meta(meta_path);
  if (!meta) throw cflab::DataError("cannot write '" + meta_path + "'");
  cflab::GeneratorRecord rec{t, a.items, votes.mode, a.bimodal.value_or(0.0), vote_seed, std::move(corr)};
  cflab::write_generator_metadata(meta, rec);
  meta << "scale_min=" << cflab::format_real(ds.scale.min) << '\n'
       << "scale_max=" << cflab::format_real(ds.scale.max) << '\n';
  std::cout << "wrote " << ds.triples.size() << " votes to " << a.out << " (metadata in " << meta_path
            << ")\n";
  return kOk;
}

int run_diag(const std::string& in, const std::string& format, const std::string& scale,
             std::size_t min_overlap, std::size_t k, const std::string& prefix) {
  const auto ds = cflab::load_dataset(in, cflab::parse_source_format(format), parse_scale(scale));
  const auto m = cflab::build_matrix(ds);
  std::cout << "users=" << m.n_users() << "\nitems=" << m.n_items() << "\nvotes=" << m.n_entries()
            << "\nsparsity=" << cflab::format_real(cflab::sparsity(m))
            << "\nvote_entropy=" << cflab::format_real(cflab::vote_entropy(m)) << '\n';
  const auto cd = cflab::correlation_distribution(m, min_overlap);
  std::cout << "correlation_mean=" << cflab::format_real(cd.mean)
            << "\ncorrelation_std=" << cflab::format_real(cd.std) << "\ncorrelation_pairs=" << cd.n_pairs
            << "\ncorrelation_histogram=";
  for (std::size_t b = 0; b < cd.histogram.size(); ++b) std::cout << (b ? ";" : "") << cd.histogram[b];
  std::cout << '\n';

  cflab::SpectralOptions opt;
  const auto spectrum = cflab::rating_spectrum(m, opt, std::max<std::size_t>(3, k));
  const auto cluster = cflab::cluster_diagnostic(spectrum);
  const auto y1_path = prefix + "_y1.csv", y12_path = prefix + "_y1y2.csv";
  std::ofstream y1(y1_path), y12(y12_path);
  if (!y1 || !y12) throw cflab::DataError("cannot write cluster diagnostic CSVs with prefix '" + prefix + "'");
  cflab::write_y1_csv(y1, cluster);
  cflab::write_y1_y2_csv(y12, cluster);
  std::cout << "spectrum=";
  for (Eigen::Index j = 0; j < spectrum.eigenvalues.size(); ++j)
    std::cout << (j ? ";" : "") << cflab::format_real(spectrum.eigenvalues(j));
  std::cout << "\nspectrum_degenerate=" << (spectrum.degenerate ? 1 : 0) << "\ncluster_csv=" << y1_path
            << ',' << y12_path << '\n';
  return kOk;
}

int run_predict(const std::string& in, const std::string& format, const std::string& scale,
                const std::string& method, std::size_t user, std::size_t item) {
  const auto ds = cflab::load_dataset(in, cflab::parse_source_format(format), parse_scale(scale));
  const auto m = cflab::build_matrix(ds);
  if (user >= m.n_users() || item >= m.n_items())
    throw cflab::UsageError("user/item outside the " + std::to_string(m.n_users()) + "x" +
                            std::to_string(m.n_items()) + " index space");
  const auto model = cflab::fit_model(cflab::parse_method(method), m);
  const auto p = model->predict(user, item);
  std::cout << "prediction=" << cflab::format_real(p.value) << "\nfallback=" << (p.fallback ? 1 : 0)
            << '\n';
  if (auto v = m.vote(user, item)) std::cout << "stored_vote=" << cflab::format_real(*v) << '\n';
  if (auto notes = model->notes(); !notes.empty()) std::cout << notes << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative-filtering laboratory: correlation and spectral recommenders"};
  app.require_subcommand(1);

  std::string config_path, out = "report.csv";
  std::vector<std::string> overrides;
  auto* sweep = app.add_subcommand("sweep", "Run an experiment plan and write an MAE report");
  sweep->add_option("--config", config_path, "key=value plan file")->check(CLI::ExistingFile);
  sweep->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  sweep->add_option("--out", out, "Report CSV path");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic correlated vote set");
  gen->add_option("--users", gen_args.users)->required();
  gen->add_option("--items", gen_args.items)->required();
  gen->add_option("--mu", gen_args.mu)->required();
  gen->add_option("--sigma", gen_args.sigma)->required();
  gen->add_option("--bimodal", gen_args.bimodal, "Shift the two user halves by +/- this offset");
  gen->add_option("--seed", gen_args.seed)->required();
  gen->add_option("--dist", gen_args.dist)->check(CLI::IsMember({"uniform", "gaussian"}));
  gen->add_option("--out", gen_args.out)->required();

  std::string in, format = "auto", scale, prefix = "cluster";
  std::size_t min_overlap = 3, k = 3;
  auto* diag = app.add_subcommand("diag", "Dataset diagnostics and spectral cluster CSVs");
  diag->add_option("--in", in)->required();
  diag->add_option("--format", format)->check(CLI::IsMember({"auto", "movielens", "jester", "triples", "csv"}));
  diag->add_option("--scale", scale, "Vote scale lo,hi for triple files");
  diag->add_option("--min-overlap", min_overlap);
  diag->add_option("--k", k, "Eigenpairs to report (at least 3)");
  diag->add_option("--out-prefix", prefix);

  std::string method;
  std::size_t user = 0, item = 0;
  auto* predict = app.add_subcommand("predict", "Predict a single vote");
  predict->add_option("--in", in)->required();
  predict->add_option("--format", format)->check(CLI::IsMember({"auto", "movielens", "jester", "triples", "csv"}));
  predict->add_option("--scale", scale);
  predict->add_option("--method", method)->required();
  predict->add_option("--user", user)->required();
  predict->add_option("--item", item)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*sweep) return run_sweep(config_path, overrides, out);
    if (*gen) return run_gen(gen_args);
    if (*diag) return run_diag(in, format, scale, min_overlap, k, prefix);
    if (*predict) return run_predict(in, format, scale, method, user, item);
  } catch (const cflab::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const cflab::ConvergenceError& e) {
    std::cerr << "non-convergence: " << e.what() << '\n';
    return kConvergence;
  } catch (const cflab::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const cflab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmpm/error.hpp"
#include "rmpm/experiments/analysis.hpp"
#include "rmpm/experiments/config.hpp"
#include "rmpm/experiments/run.hpp"
#include "rmpm/io/mtx1.hpp"
#include "rmpm/io/report.hpp"
#include "rmpm/trainer/idx.hpp"
#include "rmpm/trainer/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace rmpm;

namespace {

struct Common {
  std::string config;
  std::string preset = "desk";
  std::string regime;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> variance_fraction;
  std::optional<std::size_t> top_t;
  std::optional<std::size_t> subset_size;
  std::optional<std::size_t> jobs;
};

experiments::ExperimentConfig resolve_config(const Common& c) {
  experiments::ExperimentConfig cfg;
  if (!c.config.empty()) {
    cfg = experiments::load_config(c.config);
  } else {
    const auto regime = c.regime.empty() ? trainer::Regime::learning_rate : trainer::parse_regime(c.regime);
    cfg = experiments::preset(c.preset, regime);
  }
  if (c.seed) cfg.data.seed = *c.seed;
  if (c.variance_fraction) cfg.analysis.svcca.variance_fraction = *c.variance_fraction;
  if (c.top_t) cfg.analysis.svcca.top_t = *c.top_t;
  if (c.subset_size) cfg.analysis.subset_size = *c.subset_size;
  if (c.jobs) cfg.jobs = *c.jobs;
  cfg.validate();
  return cfg;
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) fail(Errc::invalid_argument, "--out is required");
  return c.out;
}

// A run root holding strategy directories, or one strategy directory.
std::vector<experiments::EnsembleRun> open_runs(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(Errc::io, "not a run directory: " + dir.string());
  if (fs::exists(dir / "strategy.json")) return {experiments::load_run(dir)};
  auto runs = experiments::load_runs(dir);
  if (runs.empty()) fail(Errc::io, "no strategy directories under " + dir.string());
  return runs;
}

void print(const ordered_json& j) { std::cout << io::rounded(j).dump(2) << "\n"; }

void report_incomplete(const experiments::EnsembleRun& r) {
  if (r.failed_seeds.empty() && r.note.empty()) return;
  std::cerr << r.strategy.name << ": incomplete";
  if (!r.failed_seeds.empty()) {
    std::cerr << ", failed seeds";
    for (auto s : r.failed_seeds) std::cerr << " " << s;
  }
  if (!r.note.empty()) std::cerr << " (" << r.note << ")";
  std::cerr << "\n";
}

int cmd_gen_data(const Common& c, std::optional<std::size_t> classes, std::optional<std::size_t> samples,
                 std::optional<std::size_t> test_samples, std::optional<std::size_t> size,
                 std::optional<double> noise) {
  auto cfg = resolve_config(c);
  auto& s = cfg.data.synthetic;
  if (classes) s.classes = *classes;
  if (samples) s.samples = *samples;
  if (size) s.image_size = *size;
  if (noise) s.noise = *noise;
  if (test_samples) cfg.data.test_samples = *test_samples;
  cfg.data.source = "synthetic";
  const auto out = require_out(c);
  fs::create_directories(out);
  const auto d = experiments::build_datasets(cfg);
  trainer::write_idx(d.train, out / "train-images.idx", out / "train-labels.idx");
  trainer::write_idx(d.test, out / "test-images.idx", out / "test-labels.idx");
  std::cout << "train " << d.train.size() << " samples, test " << d.test.size() << " samples, fingerprint "
            << trainer::fingerprint_hex(d.train.fingerprint) << "\n";
  return 0;
}

int run_and_report(const Common& c, const std::string& only) {
  auto cfg = resolve_config(c);
  const auto out = require_out(c);
  const auto data = experiments::build_datasets(cfg);
  const auto spec = experiments::build_network(cfg, data);
  experiments::RunOptions opts{cfg.jobs, out / "runs"};

  std::vector<experiments::EnsembleRun> runs;
  if (only.empty()) {
    runs = experiments::sweep_regime(cfg, spec, data, opts);
  } else {
    const auto all = cfg.strategies();
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& s) { return s.name == only; });
    if (it == all.end()) fail(Errc::config, "unknown strategy: " + only);
    runs.push_back(experiments::run_strategy(*it, spec, data, opts));
  }
  const auto files = io::emit_reports(experiments::analyze_runs(runs, cfg.analysis), out);
  for (const auto& f : files) std::cout << f.string() << "\n";

  bool ok = true;
  for (const auto& r : runs) {
    report_incomplete(r);
    ok = ok && r.complete();
  }
  return ok ? 0 : 3;
}

int cmd_svcca(const Common& c, const std::string& a, const std::string& b) {
  svcca::SvccaConfig cfg;
  if (c.variance_fraction) cfg.variance_fraction = *c.variance_fraction;
  if (c.top_t) cfg.top_t = *c.top_t;
  svcca::ActivationMatrix z1{"a", 0, io::read_matrix(a)};
  svcca::ActivationMatrix z2{"b", 0, io::read_matrix(b)};
  const auto spec = svcca::svcca_correlations(z1, z2, cfg.variance_fraction);
  ordered_json j;
  j["similarity"] = svcca::svcca_similarity(spec, cfg.top_t);
  j["k1"] = spec.k1;
  j["k2"] = spec.k2;
  j["correlations"] = spec.correlations;
  j["rank_deficient"] = spec.rank_deficient;
  if (!spec.warning.empty()) j["warning"] = spec.warning;
  print(j);
  return 0;
}

experiments::AnalysisConfig analysis_for(const Common& c) {
  experiments::AnalysisConfig a;
  if (!c.config.empty()) a = experiments::load_config(c.config).analysis;
  if (c.variance_fraction) a.svcca.variance_fraction = *c.variance_fraction;
  if (c.top_t) a.svcca.top_t = *c.top_t;
  if (c.subset_size) a.subset_size = *c.subset_size;
  return a;
}

int cmd_metrics(const Common& c, const std::string& dir, bool want_pm) {
  const auto a = analysis_for(c);
  ordered_json j = ordered_json::object();
  for (const auto& r : open_runs(dir)) {
    const auto s = experiments::summarize(r, a.svcca);
    ordered_json e;
    e["variants"] = s.variants;
    if (want_pm) {
      e["pm_iid"] = s.pm_iid;
      for (const auto& [k, v] : s.pm_ood) e["pm_" + k] = v;
    } else {
      // rm = -svcca
      for (const auto& [k, v] : s.svcca) e["rm_" + k] = -v;
    }
    j[r.strategy.name] = e;
  }
  print(j);
  return 0;
}

int cmd_confab(const Common& c, const std::string& dir, const std::string& pool, std::size_t n) {
  experiments::ConfabPool p;
  if (pool == "pooled") {
    p = experiments::ConfabPool::pooled;
  } else if (pool == "per-strategy") {
    p = experiments::ConfabPool::per_strategy;
  } else {
    fail(Errc::invalid_argument, "--pool must be pooled or per-strategy");
  }
  (void)c;
  ordered_json j = ordered_json::array();
  for (const auto& g : experiments::confabulation_report(open_runs(dir), p, n)) j.push_back(experiments::to_json(g));
  print(j);
  return 0;
}

int cmd_hyp1(const Common& c, const std::string& dir, const std::string& tap) {
  const auto a = analysis_for(c);
  const auto r = experiments::hypothesis1(open_runs(dir), a.subset_size, tap.empty() ? a.hyp1_tap : tap, a.svcca);
  print(experiments::to_json(r));
  return r.entries.empty() ? 3 : 0;
}

int cmd_report(const Common& c, const std::string& dir) {
  const auto runs = open_runs(dir);
  const fs::path out = c.out.empty() ? fs::path(dir) : fs::path(c.out);
  for (const auto& f : io::emit_reports(experiments::analyze_runs(runs, analysis_for(c)), out))
    std::cout << f.string() << "\n";
  return 0;
}

int exit_code(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::usage: return 1;
    case ErrorCategory::data: return 2;
    case ErrorCategory::experiment: return 3;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Representational and predictive multiplicity toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Common c;
  app.add_option("--config", c.config, "experiment configuration file");
  app.add_option("--preset", c.preset, "preset used when no config is given")
      ->check(CLI::IsMember({"paper", "desk"}));
  app.add_option("--regime", c.regime, "lr or bs grid for the preset");
  app.add_option("--out", c.out, "output directory");
  app.add_option("--seed", c.seed, "dataset seed");
  app.add_option("--variance-fraction", c.variance_fraction, "SVD variance kept (default 0.99)");
  app.add_option("--top-t", c.top_t, "canonical correlations averaged (default 20)");
  app.add_option("--subset-size", c.subset_size, "low-PM subset size (default min(1000, N/4))");
  app.add_option("--jobs", c.jobs, "worker threads");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as IDX files");
  std::optional<std::size_t> classes, samples, test_samples, image_size;
  std::optional<double> noise;
  gen->add_option("--classes", classes);
  gen->add_option("--samples", samples);
  gen->add_option("--test-samples", test_samples);
  gen->add_option("--image-size", image_size);
  gen->add_option("--noise", noise);

  auto* train = app.add_subcommand("train", "train one strategy");
  std::string strategy;
  train->add_option("--strategy", strategy, "strategy name (default: first)");

  auto* sweep = app.add_subcommand("sweep", "train every strategy and write reports");

  auto* sv = app.add_subcommand("svcca", "compare two MTX1 activation files (neurons x samples)");
  std::string file_a, file_b;
  sv->add_option("a", file_a)->required();
  sv->add_option("b", file_b)->required();

  std::string run_dir;
  auto* pm = app.add_subcommand("pm", "predictive multiplicity per strategy");
  pm->add_option("run_dir", run_dir)->required();
  auto* rm = app.add_subcommand("rm", "representational multiplicity per strategy and tap");
  rm->add_option("run_dir", run_dir)->required();

  auto* confab = app.add_subcommand("confab", "top-N confabulation listing");
  std::string pool = "pooled";
  std::size_t top_n = 16;
  confab->add_option("run_dir", run_dir)->required();
  confab->add_option("--pool", pool, "pooled or per-strategy");
  confab->add_option("--top-n", top_n);

  auto* hyp1 = app.add_subcommand("hyp1", "low-PM subset report");
  std::string tap;
  hyp1->add_option("run_dir", run_dir)->required();
  hyp1->add_option("--tap", tap);

  auto* report = app.add_subcommand("report", "write strategies.csv and summary.json");
  report->add_option("run_dir", run_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(c, classes, samples, test_samples, image_size, noise);
    if (*train) {
      if (strategy.empty()) strategy = resolve_config(c).strategies().front().name;
      return run_and_report(c, strategy);
    }
    if (*sweep) return run_and_report(c, "");
    if (*sv) return cmd_svcca(c, file_a, file_b);
    if (*pm) return cmd_metrics(c, run_dir, true);
    if (*rm) return cmd_metrics(c, run_dir, false);
    if (*confab) return cmd_confab(c, run_dir, pool, top_n);
    if (*hyp1) return cmd_hyp1(c, run_dir, tap);
    if (*report) return cmd_report(c, run_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

#include "rmpm/experiments/run.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "rmpm/error.hpp"
#include "rmpm/io/mtx1.hpp"
#include "rmpm/rng.hpp"
#include "rmpm/trainer/idx.hpp"
#include "rmpm/trainer/synthetic.hpp"

namespace rmpm::experiments {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using trainer::Dataset;

constexpr int kStoreVersion = 1;

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail(Errc::io, "cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(Errc::io, p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + p.string());
  out << j.dump(2) << "\n";
  if (!out) fail(Errc::io, "write failed for " + p.string());
}

json strategy_json(const trainer::TrainingStrategy& s) {
  return {{"name", s.name},
          {"regime", trainer::to_string(s.regime)},
          {"learning_rate", s.learning_rate},
          {"batch_size", s.batch_size},
          {"seeds", s.seeds},
          {"stopping", trainer::to_string(s.stopping)},
          {"target_accuracy", s.band.target_accuracy},
          {"epsilon", s.band.epsilon},
          {"max_epochs", s.max_epochs},
          {"eval_every_steps", s.eval_every_steps}};
}

trainer::TrainingStrategy strategy_from_json(const json& j) {
  trainer::TrainingStrategy s;
  s.name = j.at("name").get<std::string>();
  s.regime = trainer::parse_regime(j.at("regime").get<std::string>());
  s.learning_rate = j.at("learning_rate").get<double>();
  s.batch_size = j.at("batch_size").get<std::size_t>();
  s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  s.stopping = trainer::parse_stop_mode(j.at("stopping").get<std::string>());
  s.band = {j.at("target_accuracy").get<double>(), j.at("epsilon").get<double>()};
  s.max_epochs = j.at("max_epochs").get<std::size_t>();
  s.eval_every_steps = j.at("eval_every_steps").get<std::size_t>();
  return s;
}

// Identifies everything that determines a variant's bits.
std::string run_key(const trainer::TrainingStrategy& s, const trainer::NetworkSpec& spec, const Datasets& d) {
  json k = strategy_json(s);
  k.erase("seeds");
  k["network"] = spec.to_string();
  k["train"] = trainer::fingerprint_hex(d.train.fingerprint);
  k["test"] = trainer::fingerprint_hex(d.test.fingerprint);
  for (const auto& o : d.ood) k["ood"][o.name] = trainer::fingerprint_hex(o.data.fingerprint);
  k["version"] = kStoreVersion;
  return trainer::fingerprint_hex(fnv1a64(k.dump()));
}

fs::path seed_dir(const fs::path& strategy_dir, std::uint64_t seed) {
  return strategy_dir / ("seed_" + std::to_string(seed));
}

void save_variant(const VariantRecord& v, const fs::path& dir, const std::string& key) {
  fs::create_directories(dir);
  io::write_matrix(linalg::Matrix(1, v.checkpoint.size(), v.checkpoint), dir / "checkpoint.mtx");
  io::write_matrix(v.probs_iid, dir / "probs_iid.mtx");
  json meta{{"seed", v.seed},       {"accuracy", v.accuracy}, {"epochs", v.epochs},
            {"steps", v.steps},     {"key", key},             {"ood", json::array()},
            {"taps", json::object()}};
  for (const auto& [name, m] : v.probs_ood) {
    io::write_matrix(m, dir / ("probs_" + name + ".mtx"));
    meta["ood"].push_back(name);
  }
  for (const auto& [name, a] : v.taps) {
    io::write_matrix(a.values, dir / ("acts_" + name + ".mtx"));
    meta["taps"][name] = trainer::fingerprint_hex(a.fingerprint);
  }
  // meta.json last: its presence marks a complete variant.
  write_json(dir / "meta.json", meta);
}

std::optional<VariantRecord> load_variant(const fs::path& dir, const std::string* expected_key) {
  if (!fs::exists(dir / "meta.json")) return std::nullopt;
  const json meta = read_json(dir / "meta.json");
  if (expected_key && meta.value("key", std::string()) != *expected_key) return std::nullopt;
  VariantRecord v;
  v.seed = meta.at("seed").get<std::uint64_t>();
  v.accuracy = meta.at("accuracy").get<double>();
  v.epochs = meta.at("epochs").get<std::size_t>();
  v.steps = meta.at("steps").get<std::size_t>();
  v.checkpoint = io::read_matrix(dir / "checkpoint.mtx").storage();
  v.probs_iid = io::read_matrix(dir / "probs_iid.mtx");
  for (const auto& name : meta.at("ood")) {
    const auto n = name.get<std::string>();
    v.probs_ood[n] = io::read_matrix(dir / ("probs_" + n + ".mtx"));
  }
  for (const auto& [name, fp] : meta.at("taps").items()) {
    svcca::ActivationMatrix a;
    a.layer_name = name;
    a.fingerprint = std::stoull(fp.get<std::string>(), nullptr, 16);
    a.values = io::read_matrix(dir / ("acts_" + name + ".mtx"));
    v.taps[name] = std::move(a);
  }
  return v;
}

VariantRecord capture(const trainer::VariantResult& r, const Datasets& d) {
  VariantRecord v;
  v.seed = r.seed;
  v.accuracy = r.accuracy;
  v.epochs = r.epochs;
  v.steps = r.steps;
  v.checkpoint = r.model.params();
  auto fr = trainer::forward(r.model, d.test);
  v.probs_iid = std::move(fr.probs);
  for (auto& [name, m] : fr.taps) {
    v.taps[name] = svcca::ActivationMatrix{name, d.test.fingerprint, m.transposed()};
  }
  for (const auto& o : d.ood) v.probs_ood[o.name] = trainer::forward(r.model, o.data).probs;
  return v;
}

}  // namespace

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& f) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first) std::rethrow_exception(first);
}

Datasets build_datasets(const ExperimentConfig& cfg) {
  Datasets d;
  const auto& dc = cfg.data;
  if (dc.source == "synthetic") {
    d.train = trainer::generate_synthetic(dc.synthetic, derive_seed(dc.seed, "train"), trainer::Split::train);
    auto test_spec = dc.synthetic;
    test_spec.samples = dc.test_samples;
    d.test = trainer::generate_synthetic(test_spec, derive_seed(dc.seed, "test"), trainer::Split::test);
  } else if (dc.source == "idx") {
    if (dc.train_images.empty() || dc.train_labels.empty() || dc.test_images.empty() || dc.test_labels.empty()) {
      fail(Errc::config, "idx data needs train_images, train_labels, test_images and test_labels");
    }
    d.train = trainer::load_idx(dc.train_images, dc.train_labels, dc.classes, trainer::Split::train);
    d.test = trainer::load_idx(dc.test_images, dc.test_labels, dc.classes ? dc.classes : d.train.classes,
                               trainer::Split::test);
    if (dc.train_limit) d.train = d.train.head(dc.train_limit);
    if (dc.test_limit) d.test = d.test.head(dc.test_limit);
  } else {
    fail(Errc::config, "unknown data source " + dc.source);
  }
  require(d.train.shape == d.test.shape, Errc::shape_mismatch, "train and test image shapes differ");
  d.test.classes = std::max(d.test.classes, d.train.classes);
  d.train.classes = d.test.classes;
  for (const auto& name : cfg.ood) {
    const auto t = trainer::OodTransform::parse(name);
    d.ood.push_back({t.name(), trainer::apply_ood_transform(d.test, t, derive_seed(dc.seed, "ood"))});
  }
  return d;
}

trainer::NetworkSpec build_network(const ExperimentConfig& cfg, const Datasets& d) {
  if (cfg.network == "desk") return trainer::desk_network(d.train.shape, d.train.classes);
  if (cfg.network == "large") return trainer::large_network(d.train.shape, d.train.classes);
  return trainer::NetworkSpec::parse(cfg.network, d.train.shape, d.train.classes);
}

std::vector<std::string> EnsembleRun::ood_names() const {
  std::vector<std::string> out;
  if (!variants.empty())
    for (const auto& [k, _] : variants.front().probs_ood) out.push_back(k);
  return out;
}

std::vector<std::string> EnsembleRun::tap_names() const {
  std::vector<std::string> out;
  if (!variants.empty())
    for (const auto& [k, _] : variants.front().taps) out.push_back(k);
  return out;
}

multiplicity::PredictionTable EnsembleRun::iid_table() const {
  std::vector<linalg::Matrix> ms;
  for (const auto& v : variants) ms.push_back(v.probs_iid);
  return multiplicity::PredictionTable::from_variants(ms, test_fingerprint);
}

multiplicity::PredictionTable EnsembleRun::ood_table(const std::string& name) const {
  std::vector<linalg::Matrix> ms;
  for (const auto& v : variants) {
    auto it = v.probs_ood.find(name);
    if (it == v.probs_ood.end()) fail(Errc::invalid_argument, "run has no OOD set '" + name + "'");
    ms.push_back(it->second);
  }
  const auto fp = ood_fingerprints.count(name) ? ood_fingerprints.at(name) : 0;
  return multiplicity::PredictionTable::from_variants(ms, fp);
}

std::vector<svcca::ActivationMatrix> EnsembleRun::tap(const std::string& name) const {
  std::vector<svcca::ActivationMatrix> out;
  for (const auto& v : variants) {
    auto it = v.taps.find(name);
    if (it == v.taps.end()) fail(Errc::invalid_argument, "run has no tap '" + name + "'");
    out.push_back(it->second);
  }
  return out;
}

EnsembleRun run_strategy(const trainer::TrainingStrategy& strategy, const trainer::NetworkSpec& spec,
                         const Datasets& data, const RunOptions& opts) {
  strategy.validate();
  EnsembleRun run;
  run.strategy = strategy;
  run.test_fingerprint = data.test.fingerprint;
  for (const auto& o : data.ood) run.ood_fingerprints[o.name] = o.data.fingerprint;

  const auto key = run_key(strategy, spec, data);
  const auto dir = opts.store ? std::optional<fs::path>(*opts.store / strategy.name) : std::nullopt;
  const auto n = strategy.seeds.size();
  std::vector<std::optional<VariantRecord>> records(n);
  std::vector<std::string> errors(n);

  auto train_one = [&](std::size_t i, const trainer::StopRule& rule) {
    const auto seed = strategy.seeds[i];
    try {
      const auto r = trainer::train_with_rule(strategy, seed, spec, data.train, data.test, rule);
      records[i] = capture(r, data);
      if (dir) save_variant(*records[i], seed_dir(*dir, seed), key);
    } catch (const Error& e) {
      if (e.code() != Errc::target_unreachable && e.code() != Errc::non_finite_loss) throw;
      errors[i] = e.what();
    }
  };

  if (strategy.stopping == trainer::StopMode::risk_band) {
    const trainer::StopRule rule{trainer::StopRule::Kind::band, strategy.band.target_accuracy,
                                 strategy.band.epsilon};
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < n; ++i) {
      if (dir) records[i] = load_variant(seed_dir(*dir, strategy.seeds[i]), &key);
      if (!records[i]) todo.push_back(i);
    }
    parallel_for(todo.size(), opts.jobs, [&](std::size_t t) { train_one(todo[t], rule); });
  } else {
    // Pass 1: best accuracy per seed over the full budget.
    std::vector<double> best(n, -1.0);
    parallel_for(n, opts.jobs, [&](std::size_t i) {
      try {
        best[i] = trainer::train_with_rule(strategy, strategy.seeds[i], spec, data.train, data.test,
                                           {trainer::StopRule::Kind::best, 0.0, 0.0})
                      .best_accuracy;
      } catch (const Error& e) {
        if (e.code() != Errc::non_finite_loss) throw;
        errors[i] = e.what();
      }
    });
    std::vector<double> finished;
    for (std::size_t i = 0; i < n; ++i)
      if (errors[i].empty()) finished.push_back(best[i]);
    if (finished.empty()) fail(Errc::experiment_failed, "no seed of " + strategy.name + " finished training");
    run.pseudo_max_accuracy = trainer::pseudo_max_target(finished, 5);
    // Pass 2: retrain the seeds that reach the pseudo-maximum, stopping at the first crossing.
    std::vector<std::size_t> todo;
    std::vector<std::uint64_t> below;
    for (std::size_t i = 0; i < n; ++i) {
      if (!errors[i].empty()) continue;
      if (best[i] >= run.pseudo_max_accuracy) {
        todo.push_back(i);
      } else {
        below.push_back(strategy.seeds[i]);
      }
    }
    parallel_for(todo.size(), opts.jobs, [&](std::size_t t) {
      train_one(todo[t], {trainer::StopRule::Kind::at_least, run.pseudo_max_accuracy, 0.0});
    });
    if (!below.empty()) {
      run.note = std::to_string(below.size()) + " seed(s) below the pseudo-maximum accuracy were not selected";
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (records[i]) {
      run.variants.push_back(std::move(*records[i]));
    } else if (!errors[i].empty()) {
      run.failed_seeds.push_back(strategy.seeds[i]);
      if (!run.note.empty()) run.note += "; ";
      run.note += errors[i];
    }
  }
  if (dir) save_run(run, *opts.store);
  return run;
}

std::vector<EnsembleRun> sweep_regime(const ExperimentConfig& cfg, const trainer::NetworkSpec& spec,
                                      const Datasets& data, const RunOptions& opts) {
  cfg.validate();
  std::vector<EnsembleRun> runs;
  const auto strategies = cfg.strategies();
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    EnsembleRun run;
    try {
      run = run_strategy(strategies[i], spec, data, opts);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::experiment) throw;
      run.strategy = strategies[i];
      run.test_fingerprint = data.test.fingerprint;
      run.failed_seeds = strategies[i].seeds;
      run.note = e.what();
    }
    run.order = i;
    if (opts.store) save_run(run, *opts.store);
    runs.push_back(std::move(run));
  }
  return runs;
}

void save_run(const EnsembleRun& run, const fs::path& root) {
  const auto dir = root / run.strategy.name;
  fs::create_directories(dir);
  json j;
  j["strategy"] = strategy_json(run.strategy);
  j["order"] = run.order;
  j["test_fingerprint"] = trainer::fingerprint_hex(run.test_fingerprint);
  j["ood_fingerprints"] = json::object();
  for (const auto& [k, v] : run.ood_fingerprints) j["ood_fingerprints"][k] = trainer::fingerprint_hex(v);
  j["variants"] = json::array();
  for (const auto& v : run.variants) j["variants"].push_back(v.seed);
  j["failed_seeds"] = run.failed_seeds;
  j["note"] = run.note;
  j["pseudo_max_accuracy"] = run.pseudo_max_accuracy;
  write_json(dir / "strategy.json", j);
  for (const auto& v : run.variants) {
    if (!fs::exists(seed_dir(dir, v.seed) / "meta.json")) save_variant(v, seed_dir(dir, v.seed), "");
  }
}

EnsembleRun load_run(const fs::path& strategy_dir) {
  const json j = read_json(strategy_dir / "strategy.json");
  EnsembleRun run;
  try {
    run.strategy = strategy_from_json(j.at("strategy"));
    run.order = j.value("order", std::size_t{0});
    run.test_fingerprint = std::stoull(j.at("test_fingerprint").get<std::string>(), nullptr, 16);
    for (const auto& [k, v] : j.at("ood_fingerprints").items()) {
      run.ood_fingerprints[k] = std::stoull(v.get<std::string>(), nullptr, 16);
    }
    run.failed_seeds = j.at("failed_seeds").get<std::vector<std::uint64_t>>();
    run.note = j.value("note", std::string());
    run.pseudo_max_accuracy = j.value("pseudo_max_accuracy", -1.0);
    for (const auto& s : j.at("variants")) {
      auto v = load_variant(seed_dir(strategy_dir, s.get<std::uint64_t>()), nullptr);
      if (!v) fail(Errc::io, "missing variant directory for seed " + std::to_string(s.get<std::uint64_t>()));
      run.variants.push_back(std::move(*v));
    }
  } catch (const json::exception& e) {
    fail(Errc::io, (strategy_dir / "strategy.json").string() + ": " + e.what());
  }
  return run;
}

std::vector<EnsembleRun> load_runs(const fs::path& root) {
  if (!fs::is_directory(root)) fail(Errc::io, "not a run directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "strategy.json")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<EnsembleRun> runs;
  for (const auto& d : dirs) runs.push_back(load_run(d));
  std::stable_sort(runs.begin(), runs.end(),
                   [](const EnsembleRun& a, const EnsembleRun& b) { return a.order < b.order; });
  if (runs.empty()) fail(Errc::io, "no strategy directories under " + root.string());
  return runs;
}

}  // namespace rmpm::experiments

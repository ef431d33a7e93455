#include "rmpm/experiments/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "rmpm/error.hpp"
#include "rmpm/linalg/linalg.hpp"

namespace rmpm::experiments {
namespace {

using nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// NaN instead of an error for series that have no defined correlation.
double safe_pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 3 || a.size() != b.size()) return kNaN;
  for (double v : a)
    if (!std::isfinite(v)) return kNaN;
  for (double v : b)
    if (!std::isfinite(v)) return kNaN;
  try {
    return linalg::pearson(a, b);
  } catch (const Error& e) {
    if (e.code() == Errc::constant_series || e.code() == Errc::length_mismatch) return kNaN;
    throw;
  }
}

double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

// x / max, or 0 when the whole series is 0. Dividing (rather than multiplying
// by 1/max) makes the largest entry exactly 1.
double scale(double x, double max) { return max > 0.0 ? x / max : 0.0; }

ordered_json number_map(const std::map<std::string, double>& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

}  // namespace

StrategySummary summarize(const EnsembleRun& run, const svcca::SvccaConfig& cfg) {
  StrategySummary s;
  s.strategy = run.strategy.name;
  s.regime = run.strategy.regime;
  s.regime_value = run.strategy.regime_value();
  s.variants = run.variants.size();
  s.note = run.note;
  const auto k = run.variants.size();
  if (k == 0) {
    s.accuracy_mean = s.accuracy_std = s.pm_iid = kNaN;
    return s;
  }
  double sum = 0.0;
  for (const auto& v : run.variants) sum += v.accuracy;
  s.accuracy_mean = sum / static_cast<double>(k);
  double ss = 0.0;
  for (const auto& v : run.variants) ss += (v.accuracy - s.accuracy_mean) * (v.accuracy - s.accuracy_mean);
  s.accuracy_std = k > 1 ? std::sqrt(ss / static_cast<double>(k - 1)) : kNaN;

  if (k < 2) {
    s.pm_iid = kNaN;
    for (const auto& t : run.tap_names()) s.svcca[t] = kNaN;
    for (const auto& o : run.ood_names()) s.pm_ood[o] = kNaN;
    return s;
  }
  for (const auto& t : run.tap_names()) s.svcca[t] = -multiplicity::rm_ensemble(run.tap(t), cfg);
  s.pm_iid = multiplicity::pm(run.iid_table());
  for (const auto& o : run.ood_names()) s.pm_ood[o] = multiplicity::pm(run.ood_table(o));
  return s;
}

std::size_t default_subset_size(std::size_t samples) { return std::min<std::size_t>(1000, samples / 4); }

std::vector<std::size_t> low_pm_subset(std::span<const double> per_sample, std::size_t size) {
  require(size >= 1 && size <= per_sample.size(), Errc::invalid_argument,
          "subset size must be between 1 and the number of samples");
  std::vector<std::size_t> idx(per_sample.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return per_sample[a] < per_sample[b]; });
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Hyp1Report hypothesis1(std::span<const EnsembleRun> runs, std::size_t subset_size, const std::string& tap,
                       const svcca::SvccaConfig& cfg) {
  require(runs.size() >= 2, Errc::invalid_argument, "hypothesis 1 needs at least 2 runs");
  Hyp1Report r;
  r.tap = tap;

  for (const auto& run : runs) {
    if (run.variants.size() < 2) {
      r.excluded.push_back(run.strategy.name + ": fewer than 2 variants");
      continue;
    }
    const auto table = run.iid_table();
    const auto per = multiplicity::per_sample_pm(table);
    Hyp1Entry e;
    e.strategy = run.strategy.name;
    e.pm_full = multiplicity::mean_over(per);
    if (e.pm_full == 0.0) {
      r.excluded.push_back(run.strategy.name + ": PM is zero on the full set, scaling undefined");
      continue;
    }
    const std::size_t size = subset_size ? subset_size : default_subset_size(per.size());
    if (r.subset_size == 0) r.subset_size = size;
    e.subset = low_pm_subset(per, size);
    e.pm_sub = multiplicity::mean_over(per, std::span<const std::size_t>(e.subset));
    std::vector<svcca::ActivationMatrix> sub;
    for (const auto& z : run.tap(tap)) sub.push_back(svcca::select_samples(z, e.subset));
    e.rm_sub = multiplicity::rm_ensemble(sub, cfg);
    e.rm_dist = 1.0 + e.rm_sub;
    r.entries.push_back(std::move(e));
  }
  if (r.entries.empty()) return r;

  std::vector<double> dist, full, part;
  for (const auto& e : r.entries) {
    dist.push_back(e.rm_dist);
    full.push_back(e.pm_full);
    part.push_back(e.pm_sub);
  }
  const double md = max_of(dist), mf = max_of(full), mp = max_of(part);
  r.c = md > 0.0 ? 1.0 / md : 0.0;
  r.c_prime = 1.0 / mf;
  r.c_dprime = mp > 0.0 ? 1.0 / mp : 0.0;

  std::vector<double> rs, ps, fs;
  double sum_rm = 0.0, sum_pm = 0.0;
  for (auto& e : r.entries) {
    e.rm_scaled = scale(e.rm_dist, md);
    e.pm_full_scaled = scale(e.pm_full, mf);
    e.pm_sub_scaled = scale(e.pm_sub, mp);
    e.e_rm = std::abs(e.rm_scaled - e.pm_full_scaled);
    e.e_pm = std::abs(e.pm_sub_scaled - e.pm_full_scaled);
    sum_rm += e.e_rm;
    sum_pm += e.e_pm;
    rs.push_back(e.rm_scaled);
    ps.push_back(e.pm_sub_scaled);
    fs.push_back(e.pm_full_scaled);
  }
  const auto n = static_cast<double>(r.entries.size());
  r.mean_e_rm = sum_rm / n;
  r.mean_e_pm = sum_pm / n;
  r.verdict = r.mean_e_rm < r.mean_e_pm;
  r.pcc_rm_raw = safe_pearson(dist, full);
  r.pcc_pm_raw = safe_pearson(part, full);
  r.pcc_rm_scaled = safe_pearson(rs, fs);
  r.pcc_pm_scaled = safe_pearson(ps, fs);
  return r;
}

CorrelationReport correlation_report(std::span<const StrategySummary> summaries, const std::string& tap) {
  if (summaries.size() < 3) {
    fail(Errc::invalid_argument,
         "correlation report needs >= 3 strategies, got " + std::to_string(summaries.size()));
  }
  CorrelationReport r;
  r.tap = tap;
  std::vector<double> sv;
  for (const auto& s : summaries) {
    auto it = s.svcca.find(tap);
    sv.push_back(it == s.svcca.end() ? kNaN : it->second);
  }
  auto add = [&](const std::string& condition, const std::vector<double>& pm) {
    r.entries.push_back({condition, safe_pearson(sv, pm)});
  };
  std::vector<double> pm;
  for (const auto& s : summaries) pm.push_back(s.pm_iid);
  add("iid", pm);
  for (const auto& [name, _] : summaries.front().pm_ood) {
    pm.clear();
    for (const auto& s : summaries) {
      auto it = s.pm_ood.find(name);
      pm.push_back(it == s.pm_ood.end() ? kNaN : it->second);
    }
    add(name, pm);
  }
  double lo = INFINITY, hi = -INFINITY;
  for (double v : sv) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  r.delta_svcca = hi >= lo ? hi - lo : kNaN;
  return r;
}

std::vector<ConfabGroup> confabulation_report(std::span<const EnsembleRun> runs, ConfabPool pool,
                                              std::size_t n) {
  require(!runs.empty(), Errc::invalid_argument, "confabulation report needs at least one run");
  auto group = [&](const std::string& name, const multiplicity::PredictionTable& t) {
    ConfabGroup g;
    g.name = name;
    g.variants = t.variants();
    const auto entries = multiplicity::confabulation_scores(t);
    const auto top = multiplicity::top_confabulators(entries, n);
    for (auto i : top.indices) g.top.push_back(entries[i]);
    g.degenerate = std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.score == 0.0; });
    g.note = g.degenerate ? "every sample received a single label across the ensemble" : top.note;
    return g;
  };
  std::vector<ConfabGroup> out;
  if (pool == ConfabPool::pooled) {
    std::vector<multiplicity::PredictionTable> tables;
    for (const auto& r : runs)
      if (!r.variants.empty()) tables.push_back(r.iid_table());
    require(!tables.empty(), Errc::invalid_argument, "no trained variants to pool");
    out.push_back(group("pooled", multiplicity::PredictionTable::pooled(tables)));
  } else {
    for (const auto& r : runs)
      if (!r.variants.empty()) out.push_back(group(r.strategy.name, r.iid_table()));
  }
  return out;
}

ordered_json to_json(const Hyp1Report& r) {
  ordered_json j;
  j["tap"] = r.tap;
  j["subset_size"] = r.subset_size;
  j["scaling"] = {{"c", r.c}, {"c_prime", r.c_prime}, {"c_double_prime", r.c_dprime}};
  j["entries"] = ordered_json::array();
  for (const auto& e : r.entries) {
    j["entries"].push_back({{"strategy", e.strategy},
                            {"rm_sub", e.rm_sub},
                            {"rm_dist", e.rm_dist},
                            {"pm_sub", e.pm_sub},
                            {"pm_full", e.pm_full},
                            {"rm_scaled", e.rm_scaled},
                            {"pm_sub_scaled", e.pm_sub_scaled},
                            {"pm_full_scaled", e.pm_full_scaled},
                            {"e_rm", e.e_rm},
                            {"e_pm", e.e_pm}});
  }
  j["mean_e_rm"] = r.mean_e_rm;
  j["mean_e_pm"] = r.mean_e_pm;
  j["verdict"] = r.verdict;
  j["pcc_with_full_pm"] = {{"rm_raw", r.pcc_rm_raw},
                           {"rm_scaled", r.pcc_rm_scaled},
                           {"pm_raw", r.pcc_pm_raw},
                           {"pm_scaled", r.pcc_pm_scaled}};
  j["excluded"] = r.excluded;
  return j;
}

ordered_json to_json(const CorrelationReport& r) {
  ordered_json j;
  j["tap"] = r.tap;
  j["pcc"] = ordered_json::object();
  for (const auto& e : r.entries) j["pcc"][e.condition] = e.pcc;
  j["delta_svcca"] = r.delta_svcca;
  return j;
}

ordered_json to_json(const ConfabGroup& g) {
  ordered_json j;
  j["group"] = g.name;
  j["variants"] = g.variants;
  j["degenerate"] = g.degenerate;
  j["note"] = g.note;
  j["top"] = ordered_json::array();
  for (const auto& e : g.top) {
    j["top"].push_back({{"sample", e.sample_index},
                        {"score", e.score},
                        {"distinct_labels", e.distinct_labels},
                        {"pm", e.pm},
                        {"histogram", e.label_histogram}});
  }
  return j;
}

io::ReportBundle build_bundle(std::span<const StrategySummary> summaries,
                              const std::vector<CorrelationReport>& correlations, const Hyp1Report* hyp1,
                              const std::vector<ConfabGroup>& confab) {
  io::ReportBundle b;
  for (const auto& s : summaries) {
    for (const auto& [t, _] : s.svcca)
      if (std::find(b.taps.begin(), b.taps.end(), t) == b.taps.end()) b.taps.push_back(t);
    for (const auto& [o, _] : s.pm_ood)
      if (std::find(b.ood.begin(), b.ood.end(), o) == b.ood.end()) b.ood.push_back(o);
  }
  ordered_json strategies = ordered_json::array();
  for (const auto& s : summaries) {
    io::StrategyRow row;
    row.strategy = s.strategy;
    row.regime = trainer::to_string(s.regime);
    row.regime_value = s.regime_value;
    row.variants = s.variants;
    row.accuracy_mean = s.accuracy_mean;
    row.accuracy_std = s.accuracy_std;
    for (const auto& t : b.taps) row.svcca.push_back(s.svcca.count(t) ? s.svcca.at(t) : kNaN);
    row.pm_iid = s.pm_iid;
    for (const auto& o : b.ood) row.pm_ood.push_back(s.pm_ood.count(o) ? s.pm_ood.at(o) : kNaN);
    b.rows.push_back(row);
    strategies.push_back({{"strategy", s.strategy},
                          {"regime", row.regime},
                          {"value", s.regime_value},
                          {"variants", s.variants},
                          {"accuracy_mean", s.accuracy_mean},
                          {"accuracy_std", s.accuracy_std},
                          {"svcca", number_map(s.svcca)},
                          {"pm_iid", s.pm_iid},
                          {"pm_ood", number_map(s.pm_ood)},
                          {"note", s.note}});
  }
  b.summary["evaluation_set"] = "held-out test split, also used for stopping";
  b.summary["strategies"] = strategies;
  b.summary["correlations"] = ordered_json::array();
  for (const auto& c : correlations) b.summary["correlations"].push_back(to_json(c));
  b.summary["hypothesis1"] = hyp1 ? to_json(*hyp1) : ordered_json(nullptr);
  b.summary["confabulation"] = ordered_json::array();
  for (const auto& g : confab) b.summary["confabulation"].push_back(to_json(g));
  return b;
}

io::ReportBundle analyze_runs(std::span<const EnsembleRun> runs, const AnalysisConfig& cfg) {
  std::vector<StrategySummary> summaries;
  for (const auto& r : runs) summaries.push_back(summarize(r, cfg.svcca));
  std::vector<CorrelationReport> correlations;
  if (summaries.size() >= 3) {
    for (const auto& [tap, _] : summaries.front().svcca) correlations.push_back(correlation_report(summaries, tap));
  }
  std::optional<Hyp1Report> hyp1;
  const bool has_tap = std::any_of(runs.begin(), runs.end(), [&](const EnsembleRun& r) {
    const auto t = r.tap_names();
    return std::find(t.begin(), t.end(), cfg.hyp1_tap) != t.end();
  });
  if (runs.size() >= 2 && has_tap) hyp1 = hypothesis1(runs, cfg.subset_size, cfg.hyp1_tap, cfg.svcca);
  std::vector<ConfabGroup> confab;
  if (std::any_of(runs.begin(), runs.end(), [](const EnsembleRun& r) { return !r.variants.empty(); })) {
    confab = confabulation_report(runs, ConfabPool::pooled, cfg.confab_top_n);
  }
  return build_bundle(summaries, correlations, hyp1 ? &*hyp1 : nullptr, confab);
}

}  // namespace rmpm::experiments

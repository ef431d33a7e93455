#include "rmpm/experiments/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "rmpm/error.hpp"
#include "rmpm/trainer/transforms.hpp"

namespace rmpm::experiments {
namespace {

using trainer::Regime;

[[noreturn]] void config_error(std::size_t line, const std::string& what) {
  fail(Errc::config, (line ? "line " + std::to_string(line) + ": " : std::string()) + what);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

ConfigValue parse_scalar(std::string_view s, std::size_t line) {
  s = trim(s);
  if (s.empty()) config_error(line, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') config_error(line, "unterminated string");
    return {std::string(s.substr(1, s.size() - 2)), line};
  }
  if (s == "true") return {true, line};
  if (s == "false") return {false, line};
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) config_error(line, "bad value '" + std::string(s) + "'");
  return {v, line};
}

ConfigValue parse_value(std::string_view s, std::size_t line) {
  s = trim(s);
  if (s.empty() || s.front() != '[') return parse_scalar(s, line);
  if (s.back() != ']') config_error(line, "unterminated array");
  std::vector<ConfigValue> items;
  std::string_view body = trim(s.substr(1, s.size() - 2));
  while (!body.empty()) {
    std::size_t end = 0;
    bool quoted = false;
    while (end < body.size() && (quoted || body[end] != ',')) {
      if (body[end] == '"') quoted = !quoted;
      ++end;
    }
    items.push_back(parse_scalar(body.substr(0, end), line));
    body = end < body.size() ? trim(body.substr(end + 1)) : std::string_view{};
  }
  return {std::move(items), line};
}

class Section {
 public:
  Section(const ConfigTable& t, const std::string& name) : name_(name) {
    if (auto it = t.find(name); it != t.end()) entries_ = &it->second;
  }

  const ConfigValue* get(const std::string& key) {
    used_.insert(key);
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    return it == entries_->end() ? nullptr : &it->second;
  }

  double number(const std::string& key, double fallback) {
    const auto* v = get(key);
    if (!v) return fallback;
    if (!std::holds_alternative<double>(v->v)) config_error(v->line, key + " must be a number");
    return std::get<double>(v->v);
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const auto* v = get(key);
    if (!v) return fallback;
    return as_count(*v, key);
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const auto* v = get(key);
    if (!v) return fallback;
    if (!std::holds_alternative<std::string>(v->v)) config_error(v->line, key + " must be a string");
    return std::get<std::string>(v->v);
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const auto* v = get(key);
    if (!v) return fallback;
    const auto* arr = std::get_if<std::vector<ConfigValue>>(&v->v);
    if (!arr) config_error(v->line, key + " must be an array");
    std::vector<double> out;
    for (const auto& e : *arr) {
      if (!std::holds_alternative<double>(e.v)) config_error(e.line, key + " entries must be numbers");
      out.push_back(std::get<double>(e.v));
    }
    return out;
  }

  std::vector<std::uint64_t> seeds(const std::string& key, std::vector<std::uint64_t> fallback) {
    const auto* v = get(key);
    if (!v) return fallback;
    const auto* arr = std::get_if<std::vector<ConfigValue>>(&v->v);
    if (!arr) config_error(v->line, key + " must be an array");
    std::vector<std::uint64_t> out;
    for (const auto& e : *arr) out.push_back(as_count(e, key));
    return out;
  }

  std::vector<std::string> texts(const std::string& key, std::vector<std::string> fallback) {
    const auto* v = get(key);
    if (!v) return fallback;
    const auto* arr = std::get_if<std::vector<ConfigValue>>(&v->v);
    if (!arr) config_error(v->line, key + " must be an array");
    std::vector<std::string> out;
    for (const auto& e : *arr) {
      if (!std::holds_alternative<std::string>(e.v)) config_error(e.line, key + " entries must be strings");
      out.push_back(std::get<std::string>(e.v));
    }
    return out;
  }

  void reject_unknown() const {
    if (!entries_) return;
    for (const auto& [k, v] : *entries_) {
      if (!used_.count(k)) config_error(v.line, "unknown key '" + k + "' in [" + name_ + "]");
    }
  }

 private:
  static std::size_t as_count(const ConfigValue& v, const std::string& key) {
    const auto* d = std::get_if<double>(&v.v);
    if (!d || *d < 0 || *d != std::floor(*d) || *d > 9.0e15) {
      config_error(v.line, key + " must be a non-negative integer");
    }
    return static_cast<std::size_t>(*d);
  }

  std::string name_;
  const std::map<std::string, ConfigValue>* entries_ = nullptr;
  std::set<std::string> used_;
};

void read_strategy_keys(Section& s, trainer::TrainingStrategy& st) {
  st.learning_rate = s.number("learning_rate", st.learning_rate);
  st.batch_size = s.count("batch_size", st.batch_size);
  st.seeds = s.seeds("seeds", st.seeds);
  st.stopping = trainer::parse_stop_mode(s.text("stopping", trainer::to_string(st.stopping)));
  st.band.target_accuracy = s.number("target_accuracy", st.band.target_accuracy);
  st.band.epsilon = s.number("epsilon", st.band.epsilon);
  st.max_epochs = s.count("max_epochs", st.max_epochs);
  st.eval_every_steps = s.count("eval_every_steps", st.eval_every_steps);
}

}  // namespace

ConfigTable parse_config_text(std::string_view text) {
  ConfigTable t;
  std::string section = "experiment";
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) config_error(line_no, "bad section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (t.count(section)) config_error(line_no, "duplicate section [" + section + "]");
      t[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) config_error(line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) config_error(line_no, "empty key");
    if (t[section].count(key)) config_error(line_no, "duplicate key '" + key + "'");
    t[section][key] = parse_value(line.substr(eq + 1), line_no);
  }
  return t;
}

std::string strategy_name(Regime regime, double value) {
  char buf[48];
  if (regime == Regime::learning_rate) {
    std::snprintf(buf, sizeof buf, "lr_%g", value);
  } else {
    std::snprintf(buf, sizeof buf, "bs_%g", value);
  }
  return buf;
}

std::vector<trainer::TrainingStrategy> ExperimentConfig::strategies() const {
  if (!explicit_strategies.empty()) return explicit_strategies;
  std::vector<trainer::TrainingStrategy> out;
  for (double v : values) {
    auto s = base;
    if (base.regime == Regime::learning_rate) {
      s.learning_rate = v;
    } else {
      s.batch_size = static_cast<std::size_t>(v);
    }
    s.name = strategy_name(base.regime, v);
    out.push_back(s);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (explicit_strategies.empty()) {
    require(!values.empty(), Errc::config, "no regime values to sweep");
    std::set<double> seen;
    for (double v : values) {
      if (!seen.insert(v).second) fail(Errc::config, "duplicate regime value " + std::to_string(v));
      if (base.regime == Regime::batch_size && (v < 1 || v != std::floor(v))) {
        fail(Errc::config, "batch sizes must be positive integers");
      }
    }
  }
  std::set<std::string> names;
  for (const auto& s : strategies()) {
    s.validate();
    if (!names.insert(s.name).second) fail(Errc::config, "duplicate strategy name " + s.name);
  }
  require(jobs >= 1, Errc::config, "jobs must be at least 1");
  require(data.source == "synthetic" || data.source == "idx", Errc::config,
          "data source must be \"synthetic\" or \"idx\"");
  const double f = analysis.svcca.variance_fraction;
  require(f > 0.0 && f <= 1.0, Errc::config, "variance_fraction must be in (0, 1]");
  require(analysis.svcca.top_t >= 1, Errc::config, "top_t must be at least 1");
  for (const auto& o : ood) {
    try {
      trainer::OodTransform::parse(o);
    } catch (const Error& e) {
      fail(Errc::config, std::string("bad OOD transform: ") + e.what());
    }
  }
}

ExperimentConfig config_from_table(const ConfigTable& t) {
  for (const auto& [name, _] : t) {
    if (name != "experiment" && name != "data" && name != "analysis" && name.rfind("strategy.", 0) != 0) {
      fail(Errc::config, "unknown section [" + name + "]");
    }
  }
  ExperimentConfig c = preset("desk");
  {
    Section s(t, "experiment");
    c.name = s.text("name", c.name);
    c.network = s.text("network", c.network);
    c.base.regime = trainer::parse_regime(s.text("regime", trainer::to_string(c.base.regime)));
    c.values = s.numbers("values", c.values);
    read_strategy_keys(s, c.base);
    c.ood = s.texts("ood", c.ood);
    c.jobs = s.count("jobs", c.jobs);
    s.reject_unknown();
  }
  {
    Section s(t, "data");
    c.data.source = s.text("source", c.data.source);
    c.data.synthetic.classes = s.count("classes", c.data.synthetic.classes);
    if (const auto* v = s.get("classes"); v) c.data.classes = c.data.synthetic.classes;
    c.data.synthetic.samples = s.count("train_samples", c.data.synthetic.samples);
    c.data.test_samples = s.count("test_samples", c.data.test_samples);
    c.data.synthetic.image_size = s.count("image_size", c.data.synthetic.image_size);
    c.data.synthetic.noise = s.number("noise", c.data.synthetic.noise);
    c.data.seed = s.count("seed", c.data.seed);
    c.data.train_images = s.text("train_images", c.data.train_images.string());
    c.data.train_labels = s.text("train_labels", c.data.train_labels.string());
    c.data.test_images = s.text("test_images", c.data.test_images.string());
    c.data.test_labels = s.text("test_labels", c.data.test_labels.string());
    c.data.train_limit = s.count("train_limit", c.data.train_limit);
    c.data.test_limit = s.count("test_limit", c.data.test_limit);
    s.reject_unknown();
  }
  {
    Section s(t, "analysis");
    c.analysis.svcca.variance_fraction = s.number("variance_fraction", c.analysis.svcca.variance_fraction);
    c.analysis.svcca.top_t = s.count("top_t", c.analysis.svcca.top_t);
    c.analysis.subset_size = s.count("subset_size", c.analysis.subset_size);
    c.analysis.confab_top_n = s.count("confab_top_n", c.analysis.confab_top_n);
    c.analysis.hyp1_tap = s.text("hyp1_tap", c.analysis.hyp1_tap);
    s.reject_unknown();
  }
  for (const auto& [name, _] : t) {
    if (name.rfind("strategy.", 0) != 0) continue;
    Section s(t, name);
    auto st = c.base;
    st.name = name.substr(9);
    require(!st.name.empty(), Errc::config, "strategy section needs a name");
    read_strategy_keys(s, st);
    s.reject_unknown();
    c.explicit_strategies.push_back(st);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::config, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_table(parse_config_text(ss.str()));
}

ExperimentConfig preset(std::string_view name, Regime regime) {
  ExperimentConfig c;
  c.base.regime = regime;
  if (name == "desk") {
    c.name = "desk";
    c.network = "desk";
    c.base.seeds = {1, 2, 3};
    c.base.learning_rate = 1e-3;
    c.base.batch_size = 64;
    c.base.stopping = trainer::StopMode::risk_band;
    c.base.band = {0.8, 0.03};
    c.base.max_epochs = 60;
    c.base.eval_every_steps = 1;
    c.values = regime == Regime::learning_rate ? std::vector<double>{0.003, 0.0003, 0.00003}
                                               : std::vector<double>{16, 64, 256};
    c.data = DataConfig{};
  } else if (name == "paper") {
    c.name = "paper";
    c.network = "large";
    c.base.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    c.base.batch_size = 64;
    c.base.learning_rate = 1e-4;
    c.base.stopping = trainer::StopMode::risk_band;
    c.base.band = {0.98, 0.01};
    c.base.max_epochs = 100;
    c.values = regime == Regime::learning_rate
                   ? std::vector<double>{0.003, 0.002, 0.001, 0.0003, 0.0001, 0.00003, 0.00001}
                   : std::vector<double>{8, 16, 32, 64, 128, 256, 512};
    c.data.source = "idx";
    c.data.synthetic = {10, 60000, 28, 0.3};
    c.data.test_samples = 10000;
    c.analysis.subset_size = 1000;
  } else {
    fail(Errc::config, "unknown preset '" + std::string(name) + "' (expected desk or paper)");
  }
  return c;
}

}  // namespace rmpm::experiments

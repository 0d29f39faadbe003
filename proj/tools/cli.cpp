#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <list>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "zslgmm/dataset.hpp"
#include "zslgmm/error.hpp"
#include "zslgmm/experiments.hpp"
#include "zslgmm/report.hpp"
#include "zslgmm/rng.hpp"
#include "zslgmm/synthetic.hpp"
#include "zslgmm/version.hpp"

namespace zslgmm::cli {

namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::string underscored(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string fmt(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_list(std::string_view text, std::string_view separators) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find_first_of(separators, start);
    std::string item = trim(text.substr(start, end == std::string_view::npos ? end : end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const std::string t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

int parse_count(const std::string& key, const std::string& text) { return parse_number<int>(key, text); }

std::string synthetic_text(const SyntheticSpec& spec) {
  std::ostringstream out;
  out << "classes=" << spec.classes << " per_class=" << spec.per_class << " feature_dim=" << spec.feature_dim
      << " embedding_dim=" << spec.embedding_dim << " separation=" << fmt(spec.separation)
      << " sigma=" << fmt(spec.sigma) << " fidelity=" << to_string(spec.fidelity) << " noise=" << fmt(spec.noise);
  return out.str();
}

/// Everything a `run` or `upper-bound` invocation resolves to. Config files
/// and flags both go through set(), so they share names and validation.
struct Settings {
  std::optional<SyntheticSpec> synthetic;
  std::string features;
  std::string labels;
  std::vector<std::string> embeddings;
  std::string splits;
  int unseen = 0;  // 0: one fifth of the classes
  int trials = 10;
  std::vector<Method> methods{Method::Inductive, Method::Transductive};
  ExperimentConfig config;
  std::string scope = "all";
  unsigned workers = 0;  // 0: hardware concurrency
  std::string out = "zslgmm-out";
  ReportFormat format = ReportFormat::Both;

  void set(const std::string& raw_key, const std::string& raw_value);
  void set_synthetic(const std::string& tokens);
  nlohmann::json resolved(bool with_methods, bool with_scope) const;
};

void Settings::set_synthetic(const std::string& tokens) {
  SyntheticSpec spec = synthetic.value_or(SyntheticSpec{});
  for (const std::string& token : split_list(tokens, " \t,")) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ConfigError("synthetic parameter '" + token + "' is not key=value");
    const std::string key = underscored(trim(token.substr(0, eq)));
    const std::string value = trim(token.substr(eq + 1));
    const std::string where = "synthetic " + key;
    if (key == "classes") spec.classes = parse_count(where, value);
    else if (key == "per_class") spec.per_class = parse_count(where, value);
    else if (key == "feature_dim") spec.feature_dim = parse_count(where, value);
    else if (key == "embedding_dim") spec.embedding_dim = parse_count(where, value);
    else if (key == "separation") spec.separation = parse_number<double>(where, value);
    else if (key == "sigma") spec.sigma = parse_number<double>(where, value);
    else if (key == "fidelity") spec.fidelity = parse_fidelity(value);
    else if (key == "noise") spec.noise = parse_number<double>(where, value);
    else if (key == "unseen") unseen = parse_count(where, value);
    else if (key == "trials") trials = parse_count(where, value);
    else throw ConfigError("unknown synthetic parameter '" + key + "'");
  }
  synthetic = spec;
}

void Settings::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = underscored(trim(raw_key));
  const std::string value = trim(raw_value);
  if (key == "synthetic") set_synthetic(value);
  else if (key == "features") features = value;
  else if (key == "labels") labels = value;
  else if (key == "embeddings") embeddings = split_list(value, ",");
  else if (key == "splits") splits = value;
  else if (key == "unseen") unseen = parse_count(key, value);
  else if (key == "trials") trials = parse_count(key, value);
  else if (key == "methods") {
    methods.clear();
    for (const std::string& m : split_list(value, ",")) {
      const Method parsed = parse_method(m);
      if (std::find(methods.begin(), methods.end(), parsed) == methods.end()) methods.push_back(parsed);
    }
    if (methods.empty()) throw ConfigError("methods list is empty");
  } else if (key == "mode") {
    if (value == "auto") config.covariance_mode.reset();
    else config.covariance_mode = parse_covariance_mode(value);
  } else if (key == "pca_dim") config.pca_dim = parse_count(key, value);
  else if (key == "mode_threshold") config.mode_threshold = parse_number<double>(key, value);
  else if (key == "lambda") config.lasso_lambda = parse_number<double>(key, value);
  else if (key == "lasso_tol") config.lasso_tol = parse_number<double>(key, value);
  else if (key == "lasso_max_iters") config.lasso_max_iters = parse_count(key, value);
  else if (key == "ridge") config.ridge = parse_number<double>(key, value);
  else if (key == "em_tol") config.em_tol = parse_number<double>(key, value);
  else if (key == "em_max_iters") config.em_max_iters = parse_count(key, value);
  else if (key == "metric") config.metric = parse_metric(value);
  else if (key == "seed") config.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "scope") {
    if (value != "all" && value != "split") throw ConfigError("scope must be all or split, got '" + value + "'");
    scope = value;
  } else if (key == "workers") workers = parse_number<unsigned>(key, value);
  else if (key == "out") out = value;
  else if (key == "format") format = parse_report_format(value);
  else throw ConfigError("unknown setting '" + key + "'");
}

// Worker count, output location and format never change results, so they
// are left out of the echo.
nlohmann::json Settings::resolved(bool with_methods, bool with_scope) const {
  nlohmann::json doc = nlohmann::json::object();
  if (synthetic) {
    doc["synthetic"] = synthetic_text(*synthetic);
  } else {
    doc["features"] = features;
    doc["labels"] = labels;
    std::string joined;
    for (const auto& e : embeddings) joined += (joined.empty() ? "" : ",") + e;
    doc["embeddings"] = joined;
  }
  if (!splits.empty()) {
    doc["splits"] = splits;
  } else {
    doc["unseen"] = std::to_string(unseen);
    doc["trials"] = std::to_string(trials);
  }
  if (with_methods) {
    std::string joined;
    for (Method m : methods) joined += (joined.empty() ? "" : ",") + std::string(to_string(m));
    doc["methods"] = joined;
  }
  if (with_scope) doc["scope"] = scope;
  doc["mode"] = config.covariance_mode ? std::string(to_string(*config.covariance_mode)) : std::string("auto");
  doc["pca_dim"] = std::to_string(config.pca_dim);
  doc["mode_threshold"] = fmt(config.mode_threshold);
  doc["lambda"] = fmt(config.lasso_lambda);
  doc["lasso_tol"] = fmt(config.lasso_tol);
  doc["lasso_max_iters"] = std::to_string(config.lasso_max_iters);
  doc["ridge"] = fmt(config.ridge);
  doc["em_tol"] = fmt(config.em_tol);
  doc["em_max_iters"] = std::to_string(config.em_max_iters);
  doc["metric"] = std::string(to_string(config.metric));
  doc["seed"] = std::to_string(config.seed);
  return doc;
}

/// key = value lines with `#` comments, or a JSON object; a previous
/// report.json is accepted and its "resolved" block replayed.
void apply_config_file(const fs::path& path, Settings& settings) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    const nlohmann::json& entries = doc.contains("resolved") ? doc["resolved"] : doc;
    if (!entries.is_object()) throw ConfigError(path.string() + ": expected an object of settings");
    for (const auto& [key, value] : entries.items()) {
      try {
        settings.set(key, value.is_string() ? value.get<std::string>() : value.dump());
      } catch (const Error& e) {
        throw ConfigError(path.string() + ": " + e.what());
      }
    }
    return;
  }
  std::istringstream lines(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    const std::string content = trim(line.substr(0, line.find('#')));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    const std::string where = path.string() + ":" + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    try {
      settings.set(content.substr(0, eq), content.substr(eq + 1));
    } catch (const Error& e) {
      throw ConfigError(where + e.what());
    }
  }
}

/// CLI11 options collected as text and handed to Settings::set in
/// registration order, after the config file.
class FlagSet {
 public:
  void scalar(CLI::App& app, const std::string& key, const std::string& help) {
    Slot& slot = slots_.emplace_back(Slot{key, {}, nullptr, false});
    slot.option = app.add_option("--" + dashed(key), slot.values, help)->expected(1);
  }
  void list(CLI::App& app, const std::string& key, const std::string& help, int min_items, bool spaced) {
    Slot& slot = slots_.emplace_back(Slot{key, {}, nullptr, spaced});
    slot.option = app.add_option("--" + dashed(key), slot.values, help)->expected(min_items, CLI::detail::expected_max_vector_size);
  }
  void apply(Settings& settings) const {
    for (const Slot& slot : slots_) {
      if (slot.option->count() == 0) continue;
      std::string joined;
      for (const auto& v : slot.values) joined += (joined.empty() ? "" : slot.spaced ? " " : ",") + v;
      try {
        settings.set(slot.key, joined);
      } catch (const Error& e) {
        throw ConfigError("--" + dashed(slot.key) + ": " + e.what());
      }
    }
  }

 private:
  struct Slot {
    std::string key;
    std::vector<std::string> values;
    CLI::Option* option;
    bool spaced;
  };
  std::list<Slot> slots_;
};

void add_data_flags(CLI::App& app, FlagSet& flags) {
  flags.list(app, "synthetic", "Generate data: classes=N unseen=N trials=N per_class=N feature_dim=N "
                               "embedding_dim=N separation=X sigma=X fidelity=exact-linear|noisy noise=X",
             0, true);
  flags.scalar(app, "features", "Feature file (CSV id,f0,... or ZSLF binary)");
  flags.scalar(app, "labels", "Label file (CSV id,class)");
  flags.list(app, "embeddings", "Class embedding CSV; repeat to fuse several", 1, false);
  flags.scalar(app, "splits", "Split file (JSON); replaces --unseen/--trials");
  flags.scalar(app, "unseen", "Unseen classes per random split (default: a fifth of the classes)");
  flags.scalar(app, "trials", "Random splits to draw (default 10)");
  flags.scalar(app, "mode", "Covariance mode: auto, full, diagonal, unit");
  flags.scalar(app, "pca_dim", "PCA output dimension (0 disables)");
  flags.scalar(app, "mode_threshold", "Coefficient in the class-size rule for auto mode");
  flags.scalar(app, "ridge", "Covariance ridge (0 = automatic)");
  flags.scalar(app, "metric", "Headline metric: overall or macro");
  flags.scalar(app, "seed", "Seed for every random choice");
  flags.scalar(app, "workers", "Parallel trials (default: hardware concurrency)");
  flags.scalar(app, "out", "Output directory");
  flags.scalar(app, "format", "Report format: json, csv or both");
}


ZslDataset load_data(const Settings& settings) {
  const bool has_files = !settings.features.empty() || !settings.labels.empty() || !settings.embeddings.empty();
  if (settings.synthetic) {
    if (has_files) throw ConfigError("use either --synthetic or --features/--labels/--embeddings, not both");
    SyntheticSpec spec = *settings.synthetic;
    spec.seed = settings.config.seed;
    return generate_synthetic(spec).dataset;
  }
  if (settings.features.empty() || settings.labels.empty() || settings.embeddings.empty()) {
    throw ConfigError("no data: give --synthetic, or all of --features, --labels and --embeddings");
  }
  std::vector<fs::path> embeddings(settings.embeddings.begin(), settings.embeddings.end());
  return load_dataset(settings.features, settings.labels, embeddings);
}

SplitSpec resolve_splits(const Settings& settings, const ZslDataset& data) {
  if (!settings.splits.empty()) {
    SplitSpec spec = read_split_spec(settings.splits, data.class_names);
    validate_split(spec, data.class_count());
    return spec;
  }
  const int unseen = settings.unseen > 0 ? settings.unseen : std::max(1, data.class_count() / 5);
  return generate_splits(data.class_count(), unseen, settings.trials, settings.config.seed);
}

unsigned worker_count(const Settings& settings) {
  if (settings.workers > 0) return settings.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string fixed4(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

void print_summary(const ExperimentReport& report, std::ostream& out) {
  for (const Aggregate& a : report.aggregates) {
    std::string name(to_string(a.method));
    name.resize(std::max<std::size_t>(name.size(), 13), ' ');
    if (a.count == 0) {
      out << name << "  no successful trials\n";
      continue;
    }
    out << name << "  mean " << fixed4(a.mean) << "  median " << fixed4(a.median) << "  q25 " << fixed4(a.q25)
        << "  q75 " << fixed4(a.q75) << "  (" << a.count << " trials, " << to_string(report.config.metric)
        << ")\n";
  }
}

int finish_report(const ExperimentReport& report, std::ostream& out, std::ostream& err) {
  print_summary(report, out);
  if (report.failures > 0) {
    std::string first_error;
    for (const auto& t : report.trials) {
      if (t.failed) {
        first_error = "trial " + std::to_string(t.trial) + ": " + t.error;
        break;
      }
    }
    err << "zslgmm: warning: " << report.failures << " of " << report.trials.size()
        << " trials failed (" << first_error << ")\n";
  }
  if (!report.valid) {
    err << "zslgmm: error: more than 1% of trials failed; report marked invalid\n";
    return 2;
  }
  return 0;
}

int cmd_run(const Settings& settings, std::ostream& out, std::ostream& err) {
  settings.config.validate();
  const ZslDataset data = load_data(settings);
  const SplitSpec splits = resolve_splits(settings, data);
  RunOptions options;
  options.workers = worker_count(settings);
  const ExperimentReport report = run_trials(data, splits, settings.config, settings.methods, options);
  write_report(report, data.class_names, settings.out, settings.format, settings.resolved(true, false));
  out << "wrote report for " << report.trials.size() << " trials to " << settings.out << "\n";
  return finish_report(report, out, err);
}

int cmd_upper_bound(const Settings& settings, std::ostream& out, std::ostream& err) {
  settings.config.validate();
  const ZslDataset data = load_data(settings);
  if (settings.scope == "all") {
    const double acc = run_upper_bound(data, {}, settings.config);
    nlohmann::json doc;
    doc["toolkit"] = "zslgmm " + std::string(kVersion);
    doc["rng"] = std::string(CounterRng::kVersion);
    doc["scope"] = "all";
    doc["classes"] = data.class_count();
    doc["metric"] = std::string(to_string(settings.config.metric));
    doc["accuracy"] = acc;
    doc["config"] = config_to_json(settings.config);
    doc["resolved"] = settings.resolved(false, true);
    fs::create_directories(settings.out);
    const fs::path path = fs::path(settings.out) / "upper_bound.json";
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error(path.string() + ": cannot open for writing");
    file << doc.dump(2) << "\n";
    if (!file) throw Error(path.string() + ": write failed");
    out << "upper-bound (all " << data.class_count() << " classes, " << to_string(settings.config.metric)
        << "): " << fixed4(acc) << "\n";
    return 0;
  }
  const SplitSpec splits = resolve_splits(settings, data);
  RunOptions options;
  options.workers = worker_count(settings);
  const Method methods[] = {Method::UpperBound};
  const ExperimentReport report = run_trials(data, splits, settings.config, methods, options);
  write_report(report, data.class_names, settings.out, settings.format, settings.resolved(false, true));
  out << "wrote report for " << report.trials.size() << " trials to " << settings.out << "\n";
  return finish_report(report, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zero-shot classification with synthesized Gaussian signatures and EM refinement", "zslgmm"};
  app.set_version_flag("--version", "zslgmm " + std::string(kVersion));
  app.require_subcommand(1);

  // run
  CLI::App* run = app.add_subcommand("run", "Run experiment trials and write a report");
  std::string run_config;
  FlagSet run_flags;
  run->add_option("--config", run_config, "Settings file (key = value) or a previous report.json");
  add_data_flags(*run, run_flags);
  run_flags.scalar(*run, "methods", "Comma list of upper-bound, inductive, transductive, baseline");
  run_flags.scalar(*run, "lambda", "Sparse-coding penalty");
  run_flags.scalar(*run, "lasso_tol", "Coordinate-descent step tolerance");
  run_flags.scalar(*run, "lasso_max_iters", "Coordinate-descent sweep limit");
  run_flags.scalar(*run, "em_tol", "Relative log-likelihood tolerance for EM");
  run_flags.scalar(*run, "em_max_iters", "EM iteration limit");

  // upper-bound
  CLI::App* upper = app.add_subcommand("upper-bound", "Accuracy of Gaussians fit with the true labels");
  std::string upper_config;
  FlagSet upper_flags;
  upper->add_option("--config", upper_config, "Settings file (key = value) or a previous report");
  add_data_flags(*upper, upper_flags);
  upper_flags.scalar(*upper, "scope", "all: every class at once; split: unseen classes of each split");

  // splits
  CLI::App* splits = app.add_subcommand("splits", "Write random seen/unseen splits");
  std::string split_classes;
  int split_count = 0;
  int split_unseen = 0;
  int split_trials = 0;
  std::uint64_t split_seed = 0;
  std::string split_out;
  auto* classes_opt = splits->add_option("--classes", split_classes, "Class list: embeddings CSV or one name per line");
  auto* count_opt = splits->add_option("--count", split_count, "Number of classes (ids 0..N-1)");
  classes_opt->excludes(count_opt);
  splits->add_option("--unseen", split_unseen, "Unseen classes per trial")->required();
  splits->add_option("--trials", split_trials, "Number of trials")->required();
  splits->add_option("--seed", split_seed, "Seed");
  splits->add_option("--out", split_out, "Output JSON path")->required();

  // synth
  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic dataset and its ground truth");
  SyntheticSpec spec;
  std::string fidelity = "exact-linear";
  std::string synth_out;
  bool synth_binary = false;
  synth->add_option("--classes", spec.classes, "Number of classes")->capture_default_str();
  synth->add_option("--per-class", spec.per_class, "Instances per class")->capture_default_str();
  synth->add_option("--feature-dim", spec.feature_dim, "Feature dimension")->capture_default_str();
  synth->add_option("--embedding-dim", spec.embedding_dim, "Embedding dimension")->capture_default_str();
  synth->add_option("--separation", spec.separation, "Minimum mean distance in units of sigma")->capture_default_str();
  synth->add_option("--sigma", spec.sigma, "Within-class standard deviation")->capture_default_str();
  synth->add_option("--fidelity", fidelity, "exact-linear or noisy")->capture_default_str();
  synth->add_option("--noise", spec.noise, "Embedding noise norm for noisy fidelity")->capture_default_str();
  synth->add_option("--seed", spec.seed, "Seed");
  synth->add_flag("--binary", synth_binary, "Also write features.bin");
  synth->add_option("--out", synth_out, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (run->parsed() || upper->parsed()) {
      Settings settings;
      const bool is_run = run->parsed();
      const std::string& config = is_run ? run_config : upper_config;
      if (!config.empty()) apply_config_file(config, settings);
      (is_run ? run_flags : upper_flags).apply(settings);
      return is_run ? cmd_run(settings, out, err) : cmd_upper_bound(settings, out, err);
    }
    if (splits->parsed()) {
      std::vector<std::string> names;
      if (!split_classes.empty()) {
        names = read_class_list(split_classes);
      } else if (split_count > 0) {
        for (int k = 0; k < split_count; ++k) names.push_back(std::to_string(k));
      } else {
        throw ConfigError("give --classes PATH or --count N (N > 0)");
      }
      const SplitSpec spec_out =
          generate_splits(static_cast<int>(names.size()), split_unseen, split_trials, split_seed);
      write_split_spec(spec_out, names, split_out);
      out << "wrote " << spec_out.trials.size() << " splits of " << split_unseen << "/" << names.size()
          << " classes to " << split_out << "\n";
      return 0;
    }
    if (synth->parsed()) {
      spec.fidelity = parse_fidelity(fidelity);
      const SyntheticData generated = generate_synthetic(spec);
      const fs::path dir(synth_out);
      fs::create_directories(dir);
      write_features_csv(generated.dataset, dir / "features.csv");
      if (synth_binary) write_features_binary(generated.dataset, dir / "features.bin");
      write_labels_csv(generated.dataset, dir / "labels.csv");
      write_embeddings_csv(generated.dataset, dir / "embeddings.csv");
      const fs::path manifest = dir / "manifest.json";
      std::ofstream file(manifest, std::ios::binary);
      if (!file) throw Error(manifest.string() + ": cannot open for writing");
      file << synthetic_manifest(spec, generated).dump(2) << "\n";
      if (!file) throw Error(manifest.string() + ": write failed");
      out << "wrote " << generated.dataset.size() << " instances of " << spec.classes << " classes to "
          << synth_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "zslgmm: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace zslgmm::cli

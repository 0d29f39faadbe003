#include "zslgmm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "zslgmm/dimred.hpp"
#include "zslgmm/error.hpp"
#include "zslgmm/gmm_em.hpp"
#include "zslgmm/rng.hpp"
#include "zslgmm/sparse_synth.hpp"

namespace zslgmm {

std::string_view to_string(Metric metric) { return metric == Metric::Overall ? "overall" : "macro"; }

std::string_view to_string(Method method) {
  switch (method) {
    case Method::UpperBound: return "upper-bound";
    case Method::Inductive: return "inductive";
    case Method::Transductive: return "transductive";
    case Method::Baseline: return "baseline";
  }
  return "inductive";
}

Metric parse_metric(std::string_view text) {
  if (text == "overall") return Metric::Overall;
  if (text == "macro") return Metric::Macro;
  throw ConfigError("unknown metric '" + std::string(text) + "' (expected overall or macro)");
}

Method parse_method(std::string_view text) {
  if (text == "upper-bound" || text == "upper_bound") return Method::UpperBound;
  if (text == "inductive") return Method::Inductive;
  if (text == "transductive") return Method::Transductive;
  if (text == "baseline") return Method::Baseline;
  throw ConfigError("unknown method '" + std::string(text) +
                    "' (expected upper-bound, inductive, transductive or baseline)");
}

void ExperimentConfig::validate() const {
  if (pca_dim < 0) throw ConfigError("pca_dim must be >= 0");
  if (!(mode_threshold > 0.0)) throw ConfigError("mode_threshold must be positive");
  if (!(lasso_lambda >= 0.0) || !std::isfinite(lasso_lambda)) throw ConfigError("lasso_lambda must be >= 0");
  if (!(lasso_tol > 0.0)) throw ConfigError("lasso_tol must be positive");
  if (lasso_max_iters < 1) throw ConfigError("lasso_max_iters must be >= 1");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("ridge must be >= 0 (0 = automatic)");
  if (!(em_tol > 0.0)) throw ConfigError("em_tol must be positive");
  if (em_max_iters < 1) throw ConfigError("em_max_iters must be >= 1");
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json doc;
  doc["pca_dim"] = c.pca_dim;
  doc["covariance_mode"] = c.covariance_mode ? std::string(to_string(*c.covariance_mode)) : std::string("auto");
  doc["mode_threshold"] = c.mode_threshold;
  doc["lasso_lambda"] = c.lasso_lambda;
  doc["lasso_tol"] = c.lasso_tol;
  doc["lasso_max_iters"] = c.lasso_max_iters;
  doc["ridge"] = c.ridge;
  doc["em_tol"] = c.em_tol;
  doc["em_max_iters"] = c.em_max_iters;
  doc["metric"] = std::string(to_string(c.metric));
  doc["seed"] = c.seed;
  return doc;
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  ExperimentConfig c;
  c.pca_dim = doc.value("pca_dim", c.pca_dim);
  const std::string mode = doc.value("covariance_mode", std::string("auto"));
  if (mode != "auto") c.covariance_mode = parse_covariance_mode(mode);
  c.mode_threshold = doc.value("mode_threshold", c.mode_threshold);
  c.lasso_lambda = doc.value("lasso_lambda", c.lasso_lambda);
  c.lasso_tol = doc.value("lasso_tol", c.lasso_tol);
  c.lasso_max_iters = doc.value("lasso_max_iters", c.lasso_max_iters);
  c.ridge = doc.value("ridge", c.ridge);
  c.em_tol = doc.value("em_tol", c.em_tol);
  c.em_max_iters = doc.value("em_max_iters", c.em_max_iters);
  c.metric = parse_metric(doc.value("metric", std::string("overall")));
  c.seed = doc.value("seed", c.seed);
  c.validate();
  return c;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth, Metric metric) {
  if (predicted.size() != truth.size()) throw Error("accuracy: prediction and truth lengths differ");
  if (truth.empty()) throw Error("accuracy: empty input");
  if (metric == Metric::Overall) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(truth.size());
  }
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& [correct, total] = per_class[truth[i]];
    correct += predicted[i] == truth[i];
    ++total;
  }
  double sum = 0.0;
  for (const auto& [cls, counts] : per_class) {
    sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return sum / static_cast<double>(per_class.size());
}

const std::optional<MethodResult>& TrialResult::result(Method method) const {
  switch (method) {
    case Method::UpperBound: return upper_bound;
    case Method::Inductive: return inductive;
    case Method::Transductive: return transductive;
    case Method::Baseline: return baseline;
  }
  return inductive;
}

std::optional<MethodResult>& TrialResult::result(Method method) {
  return const_cast<std::optional<MethodResult>&>(std::as_const(*this).result(method));
}

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("percentile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Aggregate summarize(Method method, std::vector<double> values) {
  Aggregate a;
  a.method = method;
  a.count = values.size();
  if (values.empty()) return a;
  std::sort(values.begin(), values.end());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  a.median = percentile(values, 0.5);
  a.q25 = percentile(values, 0.25);
  a.q75 = percentile(values, 0.75);
  a.min = values.front();
  a.max = values.back();
  return a;
}

const Aggregate* ExperimentReport::aggregate(Method method) const {
  for (const auto& a : aggregates) {
    if (a.method == method) return &a;
  }
  return nullptr;
}

std::vector<Aggregate> aggregate_trials(std::span<const TrialResult> trials, std::span<const Method> methods,
                                        Metric metric) {
  std::vector<Aggregate> out;
  for (Method m : methods) {
    std::vector<double> values;
    for (const auto& t : trials) {
      if (t.failed) continue;
      if (const auto& r = t.result(m)) values.push_back(r->headline(metric));
    }
    out.push_back(summarize(m, std::move(values)));
  }
  return out;
}

namespace {

MethodResult score(std::span<const int> predicted, std::span<const int> truth, std::span<const ClassId> classes) {
  MethodResult r;
  r.accuracy = accuracy(predicted, truth, Metric::Overall);
  r.accuracy_macro = accuracy(predicted, truth, Metric::Macro);
  r.predicted.reserve(predicted.size());
  for (int p : predicted) r.predicted.push_back(classes[static_cast<std::size_t>(p)]);
  return r;
}

double min_class_size(std::span<const int> local_labels, std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (int y : local_labels) ++counts[static_cast<std::size_t>(y)];
  return static_cast<double>(*std::min_element(counts.begin(), counts.end()));
}

/// Per-trial features after the optional PCA, with labels as positions in
/// the seen / unseen class lists.
struct TrialData {
  SplitPartition parts;
  Eigen::MatrixXd seen_x;
  Eigen::MatrixXd unseen_x;
  std::vector<int> seen_y;
  std::vector<int> unseen_y;
  CovarianceMode mode = CovarianceMode::Unit;
  double ridge = 0.0;
  std::vector<std::string> notes;
};

TrialData prepare_trial(const ZslDataset& data, std::span<const ClassId> unseen, const ExperimentConfig& config) {
  config.validate();
  TrialData t;
  t.parts = apply_split(data, unseen);
  t.seen_y = t.parts.seen.local_labels();
  t.unseen_y = t.parts.unseen.local_labels();
  {
    std::vector<std::size_t> counts(t.parts.seen.classes.size(), 0);
    for (int y : t.seen_y) ++counts[static_cast<std::size_t>(y)];
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (counts[k] == 0) {
        throw DataError("seen class '" + data.class_names[static_cast<std::size_t>(t.parts.seen.classes[k])] +
                        "' has no instances");
      }
    }
  }
  if (t.parts.unseen.features.rows() == 0) throw DataError("unseen classes have no instances");

  if (config.pca_dim > 0) {
    // Transductive: the unlabeled unseen features join the PCA fit.
    Eigen::MatrixXd both(t.parts.seen.features.rows() + t.parts.unseen.features.rows(), data.feature_dim());
    both << t.parts.seen.features, t.parts.unseen.features;
    const PcaModel pca = fit_pca(both, config.pca_dim);
    t.seen_x = transform(pca, t.parts.seen.features);
    t.unseen_x = transform(pca, t.parts.unseen.features);
  } else {
    t.seen_x = t.parts.seen.features;
    t.unseen_x = t.parts.unseen.features;
  }

  if (config.ridge > 0.0) {
    t.ridge = config.ridge;
  } else {
    Eigen::MatrixXd both(t.seen_x.rows() + t.unseen_x.rows(), t.seen_x.cols());
    both << t.seen_x, t.unseen_x;
    t.ridge = default_ridge(both);
  }

  const Eigen::Index d = t.seen_x.cols();
  const double smallest_seen = min_class_size(t.seen_y, t.parts.seen.classes.size());
  const double expected_unseen =
      static_cast<double>(t.unseen_x.rows()) / static_cast<double>(t.parts.unseen.classes.size());
  const double smallest = std::min(smallest_seen, expected_unseen);
  t.mode = config.covariance_mode ? *config.covariance_mode : choose_covariance_mode(smallest, d, config.mode_threshold);
  if (t.mode == CovarianceMode::Full) {
    if (auto warning = sample_size_warning(smallest, d, config.mode_threshold)) t.notes.push_back(*warning);
  }
  return t;
}

struct Synthesized {
  std::vector<GaussianSignature> signatures;
  std::vector<ClassId> fallback_classes;
};

Synthesized synthesize(const TrialData& t, const ExperimentConfig& config) {
  const auto seen_sigs = estimate_signatures(t.seen_x, t.seen_y, t.mode, t.ridge);
  LassoOptions lasso;
  lasso.lambda = config.lasso_lambda;
  lasso.tol = config.lasso_tol;
  lasso.max_iters = config.lasso_max_iters;
  Synthesis synth = synthesize_all(t.parts.seen.embeddings, t.parts.unseen.embeddings, seen_sigs, lasso, t.mode, t.ridge);
  Synthesized out;
  for (std::size_t u = 0; u < synth.signatures.size(); ++u) {
    out.signatures.push_back(synth.signatures[u].with_class_id(t.parts.unseen.classes[u]));
    if (synth.fallback[u]) out.fallback_classes.push_back(t.parts.unseen.classes[u]);
  }
  return out;
}

MethodResult run_em(MixtureModel init, const TrialData& t, const ExperimentConfig& config) {
  EmOptions options;
  options.tol = config.em_tol;
  options.max_iters = config.em_max_iters;
  options.ridge = t.ridge;
  const FitResult fitted = fit(std::move(init), t.unseen_x, options);
  MethodResult r = score(predict(fitted.model, t.unseen_x), t.unseen_y, t.parts.unseen.classes);
  r.em_iterations = fitted.trace.iterations;
  r.em_converged = fitted.trace.converged;
  r.reseeded = fitted.trace.reseeded;
  return r;
}

MixtureModel random_init(const TrialData& t, const ExperimentConfig& config, std::size_t trial_index) {
  CounterRng rng = CounterRng(config.seed).substream("baseline").substream(static_cast<std::uint64_t>(trial_index));
  const auto n = static_cast<std::size_t>(t.unseen_x.rows());
  const std::size_t k = t.parts.unseen.classes.size();
  if (n < k) throw DataError("fewer unseen instances than unseen classes");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<GaussianSignature> comps;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(pool[i], pool[j]);
    comps.push_back(GaussianSignature::unit(t.unseen_x.row(static_cast<Eigen::Index>(pool[i])).transpose(),
                                            t.parts.unseen.classes[i]));
  }
  return init_mixture(std::move(comps));
}

MethodResult upper_bound_on(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const ClassId> classes,
                            CovarianceMode mode, double ridge) {
  const auto sigs = estimate_signatures(X, y, mode, ridge);
  if (sigs.size() != static_cast<std::size_t>(*std::max_element(y.begin(), y.end()) + 1)) {
    throw DataError("upper bound: a class has no instances");
  }
  return score(classify_max_density(sigs, X), y, classes);
}

TrialResult run_methods(const ZslDataset& data, std::span<const ClassId> unseen, const ExperimentConfig& config,
                        std::span<const Method> methods, std::size_t trial_index, const RunHooks* hooks) {
  const auto wants = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
  TrialData t = prepare_trial(data, unseen, config);
  TrialResult result;
  result.trial = trial_index;
  result.unseen = t.parts.unseen.classes;
  result.mode = t.mode;
  result.notes = t.notes;

  if (wants(Method::UpperBound)) result.upper_bound = upper_bound_on(t.unseen_x, t.unseen_y, t.parts.unseen.classes, t.mode, t.ridge);

  if (wants(Method::Inductive) || wants(Method::Transductive)) {
    Synthesized synth = synthesize(t, config);
    result.fallback_classes = synth.fallback_classes;
    if (wants(Method::Inductive)) {
      result.inductive = score(classify_max_density(synth.signatures, t.unseen_x), t.unseen_y, t.parts.unseen.classes);
    }
    if (wants(Method::Transductive)) {
      if (hooks && hooks->on_em_fit) hooks->on_em_fit(trial_index);
      result.transductive = run_em(init_mixture(std::move(synth.signatures)), t, config);
    }
  }

  if (wants(Method::Baseline)) {
    if (hooks && hooks->on_em_fit) hooks->on_em_fit(trial_index);
    TrialData unit_view = t;
    unit_view.mode = CovarianceMode::Unit;
    result.baseline = run_em(random_init(unit_view, config, trial_index), unit_view, config);
  }
  return result;
}

}  // namespace

double run_upper_bound(const ZslDataset& data, std::span<const ClassId> classes, const ExperimentConfig& config) {
  config.validate();
  std::vector<ClassId> ids(classes.begin(), classes.end());
  if (ids.empty()) {
    ids.resize(static_cast<std::size_t>(data.class_count()));
    std::iota(ids.begin(), ids.end(), 0);
  }
  const Partition part = select_classes(data, ids);
  const std::vector<int> y = part.local_labels();
  Eigen::MatrixXd X = part.features;
  if (config.pca_dim > 0) X = transform(fit_pca(X, config.pca_dim), X);
  const double ridge = config.ridge > 0.0 ? config.ridge : default_ridge(X);
  const CovarianceMode mode = config.covariance_mode
                                  ? *config.covariance_mode
                                  : choose_covariance_mode(min_class_size(y, part.classes.size()), X.cols(),
                                                           config.mode_threshold);
  return upper_bound_on(X, y, part.classes, mode, ridge).headline(config.metric);
}

TrialResult run_inductive(const ZslDataset& data, std::span<const ClassId> unseen, const ExperimentConfig& config) {
  const Method m[] = {Method::Inductive};
  return run_methods(data, unseen, config, m, 0, nullptr);
}

TrialResult run_transductive(const ZslDataset& data, std::span<const ClassId> unseen,
                             const ExperimentConfig& config) {
  const Method m[] = {Method::Inductive, Method::Transductive};
  return run_methods(data, unseen, config, m, 0, nullptr);
}

TrialResult run_baseline_random_init(const ZslDataset& data, std::span<const ClassId> unseen,
                                     const ExperimentConfig& config, std::size_t trial_index) {
  const Method m[] = {Method::Baseline};
  return run_methods(data, unseen, config, m, trial_index, nullptr);
}

ExperimentReport run_trials(const ZslDataset& data, const SplitSpec& splits, const ExperimentConfig& config,
                            std::span<const Method> methods, const RunOptions& options) {
  config.validate();
  validate_split(splits, data.class_count());
  if (methods.empty()) throw ConfigError("no methods requested");

  ExperimentReport report;
  report.config = config;
  report.methods.assign(methods.begin(), methods.end());
  report.split_seed = splits.seed;
  report.trials.resize(splits.trials.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= splits.trials.size()) return;
      TrialResult& slot = report.trials[i];
      try {
        slot = run_methods(data, splits.trials[i], config, methods, i, &options.hooks);
      } catch (const std::exception& e) {
        slot = TrialResult{};
        slot.trial = i;
        slot.unseen = splits.trials[i];
        std::sort(slot.unseen.begin(), slot.unseen.end());
        slot.failed = true;
        slot.error = e.what();
      }
    }
  };
  const unsigned workers =
      std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(splits.trials.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (const auto& t : report.trials) report.failures += t.failed ? 1 : 0;
  report.valid = report.failures * 100 <= report.trials.size();
  report.aggregates = aggregate_trials(report.trials, report.methods, config.metric);
  return report;
}

}  // namespace zslgmm

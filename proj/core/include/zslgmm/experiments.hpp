#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "zslgmm/dataset.hpp"
#include "zslgmm/signatures.hpp"

namespace zslgmm {

enum class Metric { Overall, Macro };
/// Upper bound (true-label Gaussians), inductive synthesized signatures,
/// transductive EM refinement, and EM from random datapoints.
enum class Method { UpperBound, Inductive, Transductive, Baseline };

std::string_view to_string(Metric metric);
std::string_view to_string(Method method);
Metric parse_metric(std::string_view text);
/// "upper-bound", "inductive", "transductive", "baseline".
Method parse_method(std::string_view text);

struct ExperimentConfig {
  /// 0 disables PCA.
  int pca_dim = 0;
  /// Unset: choose per trial from the smallest expected class size.
  std::optional<CovarianceMode> covariance_mode;
  /// Coefficient in the N_k >= threshold * d^2 sample-size rule.
  double mode_threshold = 1.0;
  double lasso_lambda = 0.1;
  double lasso_tol = 1e-10;
  int lasso_max_iters = 100000;
  /// 0 selects default_ridge() of the trial's (reduced) features.
  double ridge = 0.0;
  double em_tol = 1e-6;
  int em_max_iters = 200;
  Metric metric = Metric::Overall;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// Overall: fraction correct. Macro: unweighted mean of per-class recall over
/// the classes present in `truth`. Throws on empty or unequal inputs.
double accuracy(std::span<const int> predicted, std::span<const int> truth, Metric metric);

struct MethodResult {
  double accuracy = 0.0;
  double accuracy_macro = 0.0;
  int em_iterations = 0;
  bool em_converged = true;
  int reseeded = 0;
  /// Predicted global class id per unseen instance (not serialized).
  std::vector<ClassId> predicted;

  double headline(Metric metric) const { return metric == Metric::Overall ? accuracy : accuracy_macro; }
};

struct TrialResult {
  std::size_t trial = 0;
  std::vector<ClassId> unseen;
  CovarianceMode mode = CovarianceMode::Unit;
  std::optional<MethodResult> upper_bound;
  std::optional<MethodResult> inductive;
  std::optional<MethodResult> transductive;
  std::optional<MethodResult> baseline;
  /// Unseen classes whose sparse code was all zero (seen average used).
  std::vector<ClassId> fallback_classes;
  std::vector<std::string> notes;
  bool failed = false;
  std::string error;

  const std::optional<MethodResult>& result(Method method) const;
  std::optional<MethodResult>& result(Method method);
};

/// Box-plot statistics; quartiles use linear interpolation between order
/// statistics.
struct Aggregate {
  Method method = Method::Inductive;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// p in [0, 1] over already-sorted values.
double percentile(std::span<const double> sorted, double p);
Aggregate summarize(Method method, std::vector<double> values);

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<Method> methods;
  std::uint64_t split_seed = 0;
  std::vector<TrialResult> trials;
  std::vector<Aggregate> aggregates;
  std::size_t failures = 0;
  /// False when more than 1% of trials failed.
  bool valid = true;

  const Aggregate* aggregate(Method method) const;
};

/// Aggregates over the non-failed trials, one per method, using `metric`.
std::vector<Aggregate> aggregate_trials(std::span<const TrialResult> trials, std::span<const Method> methods,
                                        Metric metric);

/// Fits one Gaussian per class from the true labels and classifies every
/// instance of those classes by maximum log-density with equal priors.
/// `classes` empty means all classes.
double run_upper_bound(const ZslDataset& data, std::span<const ClassId> classes, const ExperimentConfig& config);

/// PCA -> seen signatures -> sparse synthesis -> max-density classification
/// of the unseen instances under the virtual signatures.
TrialResult run_inductive(const ZslDataset& data, std::span<const ClassId> unseen, const ExperimentConfig& config);

/// The inductive pipeline followed by EM refinement from the virtual
/// signatures; records both accuracies.
TrialResult run_transductive(const ZslDataset& data, std::span<const ClassId> unseen,
                             const ExperimentConfig& config);

/// EM with Unit components started at K^u random unseen datapoints (drawn
/// from the "baseline" substream of config.seed, indexed by trial), scored
/// with component k taken as unseen class k.
TrialResult run_baseline_random_init(const ZslDataset& data, std::span<const ClassId> unseen,
                                     const ExperimentConfig& config, std::size_t trial_index = 0);

struct RunHooks {
  /// Called with the trial index right before any EM fit.
  std::function<void(std::size_t)> on_em_fit;
};

struct RunOptions {
  /// Worker threads; results do not depend on this.
  unsigned workers = 1;
  RunHooks hooks;
};

/// Runs the requested methods on every trial of `splits`. A trial that throws
/// is recorded as failed and left out of the aggregates.
ExperimentReport run_trials(const ZslDataset& data, const SplitSpec& splits, const ExperimentConfig& config,
                            std::span<const Method> methods, const RunOptions& options = {});

}  // namespace zslgmm

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "zslgmm/signatures.hpp"

namespace zslgmm {

/// Mixing weights plus one Gaussian component per unseen class.
struct MixtureModel {
  Eigen::VectorXd weights;
  std::vector<GaussianSignature> components;
  CovarianceMode mode = CovarianceMode::Unit;

  Eigen::Index size() const { return static_cast<Eigen::Index>(components.size()); }
  Eigen::Index dim() const { return components.empty() ? 0 : components.front().dim(); }
};

/// Posterior responsibilities (rows: points, columns: components) and the
/// log-likelihood of the model that produced them.
struct EStep {
  Eigen::MatrixXd responsibilities;
  double log_likelihood = 0.0;
};

struct MStep {
  MixtureModel model;
  /// Components that collapsed (N_k < 1e-8) and were reseeded.
  int reseeded = 0;
};

struct EmOptions {
  /// Stop when |LL_t - LL_{t-1}| < tol * |LL_t|.
  double tol = 1e-6;
  int max_iters = 200;
  /// Eigenvalue / variance floor applied in the M-step.
  double ridge = 1e-6;
};

struct FitTrace {
  /// LL of the model before each M-step, then of the returned model.
  std::vector<double> log_likelihood;
  bool converged = false;
  /// M-steps performed.
  int iterations = 0;
  int reseeded = 0;
};

struct FitResult {
  MixtureModel model;
  FitTrace trace;
};

/// Uniform weights over the given components, kept verbatim. All components
/// must share dimension and covariance mode.
MixtureModel init_mixture(std::vector<GaussianSignature> components);

/// N x K matrix of log pi_k + log N(x_n | mu_k, Sigma_k).
Eigen::MatrixXd weighted_log_densities(const MixtureModel& model, const Eigen::MatrixXd& X);

/// sum_n log sum_k pi_k N(x_n | mu_k, Sigma_k) via per-row log-sum-exp.
/// Throws NumericalError naming the first non-finite row.
double log_likelihood(const MixtureModel& model, const Eigen::MatrixXd& X);

EStep e_step(const MixtureModel& model, const Eigen::MatrixXd& X);

/// Weighted re-estimation with N_k = sum_n r_nk, pi_k = N_k / N,
/// mu_k = sum_n r_nk x_n / N_k and the N_k-normalized weighted scatter. Full
/// and Diagonal covariances are the constrained maximizers with every
/// eigenvalue (variance) at least `ridge`; Unit stays the identity.
MStep m_step(const MixtureModel& model, const Eigen::MatrixXd& X, const Eigen::MatrixXd& responsibilities,
             double ridge);

/// Alternates e_step and m_step until the relative LL change drops below
/// tol or max_iters M-steps have run. Non-convergence is reported in the
/// trace, not thrown.
FitResult fit(MixtureModel model, const Eigen::MatrixXd& X, const EmOptions& options = {});

/// Argmax posterior component per row; ties go to the lowest index.
std::vector<int> predict(const MixtureModel& model, const Eigen::MatrixXd& X);

/// Unit below `dim` expected points per class, Diagonal below
/// threshold * dim^2, otherwise Full.
CovarianceMode choose_covariance_mode(double min_class_size, Eigen::Index dim, double threshold = 1.0);

/// "iteration,log_likelihood" rows, iteration counted from 0.
std::string trace_to_csv(const FitTrace& trace);

/// Signature documents plus a "weights" array.
nlohmann::json model_to_json(const MixtureModel& model);
MixtureModel model_from_json(const nlohmann::json& doc);

}  // namespace zslgmm

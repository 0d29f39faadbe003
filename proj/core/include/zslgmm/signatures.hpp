#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "zslgmm/dataset.hpp"

namespace zslgmm {

enum class CovarianceMode { Full, Diagonal, Unit };

std::string_view to_string(CovarianceMode mode);
/// Accepts "full", "diagonal", "unit"; throws ConfigError otherwise.
CovarianceMode parse_covariance_mode(std::string_view text);

/// Mean and covariance of one class's Gaussian, with the log-normalizer
/// cached. Full covariances are held with their Cholesky factor; densities
/// are evaluated through triangular solves.
class GaussianSignature {
public:
  static GaussianSignature unit(Eigen::VectorXd mean, ClassId class_id = -1);
  /// Throws NumericalError unless every variance is positive and finite.
  static GaussianSignature diagonal(Eigen::VectorXd mean, Eigen::VectorXd variances, ClassId class_id = -1);
  /// Throws NumericalError (naming the class) when `covariance` is not
  /// symmetric positive definite.
  static GaussianSignature full(Eigen::VectorXd mean, Eigen::MatrixXd covariance, ClassId class_id = -1);

  CovarianceMode mode() const { return mode_; }
  ClassId class_id() const { return class_id_; }
  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  /// Diagonal mode only.
  const Eigen::VectorXd& variances() const { return variances_; }
  /// Full mode only.
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  /// Covariance as a dense matrix in every mode.
  Eigen::MatrixXd dense_covariance() const;
  /// -(d ln 2pi + ln det Sigma) / 2.
  double log_normalizer() const { return log_normalizer_; }

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Log-density of every row of X.
  Eigen::VectorXd log_density_rows(const Eigen::MatrixXd& X) const;

  GaussianSignature with_class_id(ClassId id) const;

private:
  GaussianSignature() = default;

  CovarianceMode mode_ = CovarianceMode::Unit;
  ClassId class_id_ = -1;
  Eigen::VectorXd mean_;
  Eigen::VectorXd variances_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd cholesky_;  // lower factor, Full mode
  double log_normalizer_ = 0.0;
};

/// 1e-4 times the mean per-column variance of X (population convention).
/// Falls back to 1e-4 when every column is constant.
double default_ridge(const Eigen::MatrixXd& X);

/// One signature per class present in `labels`, ascending by class id.
/// Means are sample means; Full covariances use the 1/N_k convention plus
/// ridge * I; Diagonal keeps the diagonal of that; Unit is the identity.
std::vector<GaussianSignature> estimate_signatures(const Eigen::MatrixXd& X, std::span<const ClassId> labels,
                                                   CovarianceMode mode, double ridge);

/// Index of the signature with the highest log-density for each row
/// (equal priors; ties go to the lowest index).
std::vector<int> classify_max_density(std::span<const GaussianSignature> signatures, const Eigen::MatrixXd& X);

nlohmann::json to_json(const GaussianSignature& signature);
GaussianSignature signature_from_json(const nlohmann::json& doc);

}  // namespace zslgmm

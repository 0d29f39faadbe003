#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace zslgmm {

/// Principal subspace of a feature matrix.
///
/// `basis` is d x D with orthonormal rows ordered by decreasing explained
/// variance; each row's largest-magnitude entry is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;
  Eigen::VectorXd explained_variance;

  Eigen::Index input_dim() const { return basis.cols(); }
  Eigen::Index output_dim() const { return basis.rows(); }
};

/// Fits the top-`dim` principal directions of the rows of `X` using the
/// 1/(N-1) sample covariance. Works on the D x D covariance when D <= N and on
/// the N x N Gram matrix otherwise. Directions beyond the numerical rank are
/// kept with (near) zero variance.
PcaModel fit_pca(const Eigen::MatrixXd& X, Eigen::Index dim);

/// Rows mapped to basis * (x - mean).
Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& X);

/// Inverse of `transform` restricted to the principal subspace.
Eigen::MatrixXd reconstruct(const PcaModel& model, const Eigen::MatrixXd& Z);

/// Warning text when a class of `class_size` instances is too small for a
/// full covariance in `dim` dimensions (N_k < threshold * dim^2).
std::optional<std::string> sample_size_warning(double class_size, Eigen::Index dim, double threshold = 1.0);

}  // namespace zslgmm

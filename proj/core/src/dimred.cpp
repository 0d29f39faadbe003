#include "zslgmm/dimred.hpp"

#include <cmath>

#include "zslgmm/error.hpp"

namespace zslgmm {
namespace {

// Flip so the largest-magnitude entry is positive.
void canonical_sign(Eigen::MatrixXd& basis, Eigen::Index i) {
  Eigen::Index arg = 0;
  basis.row(i).cwiseAbs().maxCoeff(&arg);
  if (basis(i, arg) < 0) basis.row(i) *= -1.0;
}

// Fill rows [from, d) with unit vectors orthogonal to every earlier row,
// taking the standard basis vector with the largest residual each time.
void complete_basis(Eigen::MatrixXd& basis, Eigen::Index from) {
  const Eigen::Index dim = basis.cols();
  for (Eigen::Index r = from; r < basis.rows(); ++r) {
    Eigen::RowVectorXd best;
    double best_norm = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      Eigen::RowVectorXd v = Eigen::RowVectorXd::Unit(dim, i);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index q = 0; q < r; ++q) v -= v.dot(basis.row(q)) * basis.row(q);
      }
      const double norm = v.norm();
      if (norm > best_norm) {
        best_norm = norm;
        best = v;
      }
    }
    if (!(best_norm > 1e-8)) throw NumericalError("cannot complete PCA basis");
    basis.row(r) = best / best_norm;
  }
}

}  // namespace

PcaModel fit_pca(const Eigen::MatrixXd& X, Eigen::Index dim) {
  const Eigen::Index n = X.rows();
  const Eigen::Index features = X.cols();
  if (n < 2) throw NumericalError("PCA needs at least 2 rows");
  if (dim < 1 || dim > std::min(n, features)) {
    throw NumericalError("PCA dimension " + std::to_string(dim) + " outside [1, " +
                         std::to_string(std::min(n, features)) + "]");
  }
  if (!X.allFinite()) throw NumericalError("PCA input contains non-finite values");

  PcaModel model;
  model.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
  const double scale = 1.0 / static_cast<double>(n - 1);
  model.basis.resize(dim, features);
  model.explained_variance.resize(dim);

  if (features <= n) {
    const Eigen::MatrixXd cov = scale * (centered.transpose() * centered);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
    for (Eigen::Index i = 0; i < dim; ++i) {
      const Eigen::Index src = features - 1 - i;  // eigenvalues ascend
      model.basis.row(i) = eig.eigenvectors().col(src).transpose();
      model.explained_variance(i) = std::max(0.0, eig.eigenvalues()(src));
    }
  } else {
    const Eigen::MatrixXd gram = scale * (centered * centered.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("Gram eigendecomposition failed");
    const double top = std::max(eig.eigenvalues()(n - 1), 0.0);
    const double cutoff = top * 1e-12 * static_cast<double>(std::max(n, features));
    Eigen::Index filled = 0;
    for (; filled < dim; ++filled) {
      const Eigen::Index src = n - 1 - filled;
      const double lambda = eig.eigenvalues()(src);
      if (!(lambda > cutoff)) break;
      // Gram eigenvector v maps to the covariance eigenvector X^T v / sqrt((N-1) lambda).
      Eigen::RowVectorXd direction = (centered.transpose() * eig.eigenvectors().col(src)).transpose();
      direction /= direction.norm();
      model.basis.row(filled) = direction;
      model.explained_variance(filled) = lambda;
    }
    for (Eigen::Index i = filled; i < dim; ++i) model.explained_variance(i) = 0.0;
    complete_basis(model.basis, filled);
  }
  for (Eigen::Index i = 0; i < dim; ++i) canonical_sign(model.basis, i);
  return model;
}

Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.input_dim()) {
    throw NumericalError("PCA transform expects " + std::to_string(model.input_dim()) + " columns, got " +
                         std::to_string(X.cols()));
  }
  return (X.rowwise() - model.mean.transpose()) * model.basis.transpose();
}

Eigen::MatrixXd reconstruct(const PcaModel& model, const Eigen::MatrixXd& Z) {
  if (Z.cols() != model.output_dim()) {
    throw NumericalError("PCA reconstruct expects " + std::to_string(model.output_dim()) + " columns, got " +
                         std::to_string(Z.cols()));
  }
  return (Z * model.basis).rowwise() + model.mean.transpose();
}

std::optional<std::string> sample_size_warning(double class_size, Eigen::Index dim, double threshold) {
  const double needed = threshold * static_cast<double>(dim) * static_cast<double>(dim);
  if (class_size >= needed) return std::nullopt;
  return "smallest class has " + std::to_string(static_cast<long long>(class_size)) + " instances; a full covariance in " +
         std::to_string(dim) + " dimensions wants at least " + std::to_string(static_cast<long long>(std::ceil(needed)));
}

}  // namespace zslgmm

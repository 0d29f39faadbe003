#include "zslgmm/sparse_synth.hpp"

#include <cmath>

namespace zslgmm {
namespace {

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& sym, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed while flooring covariance");
  if (eig.eigenvalues().minCoeff() >= floor) return sym;
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

std::vector<Eigen::Index> SparseCode::support() const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < coefficients.size(); ++j) {
    if (coefficients(j) != 0.0) out.push_back(j);
  }
  return out;
}

double lasso_objective(const Eigen::MatrixXd& dictionary, const Eigen::VectorXd& target,
                       const Eigen::VectorXd& coefficients, double lambda) {
  return (target - dictionary * coefficients).squaredNorm() + lambda * coefficients.lpNorm<1>();
}

namespace {

// Coordinate descent creeps toward the optimum when atoms are correlated.
// Once the support and signs have settled, the optimum on that face solves
// D_S^T D_S a_S = D_S^T e - (lambda/2) sign(a_S); take it when the signs agree
// and the objective does not go up.
void polish_active_set(const Eigen::MatrixXd& dictionary, const Eigen::VectorXd& target, double lambda,
                       Eigen::VectorXd& coefficients) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < coefficients.size(); ++j) {
    if (coefficients(j) != 0.0) support.push_back(j);
  }
  if (support.empty()) return;
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd sub(dictionary.rows(), k);
  Eigen::VectorXd signs(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    sub.col(i) = dictionary.col(support[static_cast<std::size_t>(i)]);
    signs(i) = coefficients(support[static_cast<std::size_t>(i)]) > 0.0 ? 1.0 : -1.0;
  }
  const Eigen::MatrixXd gram = sub.transpose() * sub;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
  const Eigen::VectorXd face = ldlt.solve(sub.transpose() * target - 0.5 * lambda * signs);
  if (!face.allFinite()) return;
  Eigen::VectorXd candidate = Eigen::VectorXd::Zero(coefficients.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    double v = face(i);
    if (std::abs(v) < kCoefficientDeadZone) v = 0.0;
    if (v * signs(i) < 0.0) return;
    candidate(support[static_cast<std::size_t>(i)]) = v;
  }
  if (lasso_objective(dictionary, target, candidate, lambda) <=
      lasso_objective(dictionary, target, coefficients, lambda)) {
    coefficients = candidate;
  }
}

}  // namespace

SparseCode solve_lasso(const Eigen::MatrixXd& dictionary, const Eigen::VectorXd& target,
                       const LassoOptions& options) {
  if (dictionary.rows() != target.size()) {
    throw NumericalError("lasso target has length " + std::to_string(target.size()) + ", dictionary rows " +
                         std::to_string(dictionary.rows()));
  }
  if (dictionary.cols() < 1) throw NumericalError("lasso dictionary has no atoms");
  if (!dictionary.allFinite() || !target.allFinite() || !std::isfinite(options.lambda)) {
    throw NumericalError("lasso inputs must be finite");
  }
  if (options.lambda < 0.0) throw NumericalError("lasso lambda must be non-negative");
  if (!(options.tol > 0.0)) throw NumericalError("lasso tolerance must be positive");

  const Eigen::Index atoms = dictionary.cols();
  const Eigen::VectorXd col_sq = dictionary.colwise().squaredNorm().transpose();
  for (Eigen::Index j = 0; j < atoms; ++j) {
    if (!(col_sq(j) > 0.0)) throw NumericalError("lasso dictionary column " + std::to_string(j) + " is zero");
  }

  SparseCode code;
  code.coefficients = Eigen::VectorXd::Zero(atoms);
  Eigen::VectorXd residual = target;
  const double half_lambda = 0.5 * options.lambda;

  for (int sweep = 0; sweep < options.max_iters; ++sweep) {
    double max_step = 0.0;
    for (Eigen::Index j = 0; j < atoms; ++j) {
      const double old = code.coefficients(j);
      const double c = dictionary.col(j).dot(residual) + old * col_sq(j);
      double updated = soft_threshold(c, half_lambda) / col_sq(j);
      if (std::abs(updated) < kCoefficientDeadZone) updated = 0.0;
      const double step = updated - old;
      if (step != 0.0) {
        residual.noalias() -= step * dictionary.col(j);
        code.coefficients(j) = updated;
        max_step = std::max(max_step, std::abs(step));
      }
    }
    code.iterations = sweep + 1;
    if (options.record_history) {
      code.sweep_objectives.push_back(lasso_objective(dictionary, target, code.coefficients, options.lambda));
    }
    if (max_step < options.tol) {
      code.converged = true;
      break;
    }
  }
  polish_active_set(dictionary, target, options.lambda, code.coefficients);
  code.objective = lasso_objective(dictionary, target, code.coefficients, options.lambda);
  return code;
}

GaussianSignature synthesize_signature(std::span<const GaussianSignature> seen, const SparseCode& code,
                                       CovarianceMode mode, double ridge) {
  if (seen.empty()) throw NumericalError("no seen signatures to synthesize from");
  if (static_cast<std::size_t>(code.coefficients.size()) != seen.size()) {
    throw NumericalError("code has " + std::to_string(code.coefficients.size()) + " coefficients for " +
                         std::to_string(seen.size()) + " seen signatures");
  }
  if (!(ridge > 0.0)) throw NumericalError("ridge must be positive");
  const Eigen::Index d = seen.front().dim();
  for (const auto& s : seen) {
    if (s.dim() != d) throw NumericalError("seen signatures differ in dimension");
    if (mode != CovarianceMode::Unit && s.mode() != mode) {
      throw NumericalError("seen signature mode '" + std::string(to_string(s.mode())) +
                           "' does not match requested '" + std::string(to_string(mode)) + "'");
    }
  }
  if ((code.coefficients.array() == 0.0).all()) {
    throw DegenerateCodeError("sparse code is all zero");
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t j = 0; j < seen.size(); ++j) {
    const double a = code.coefficients(static_cast<Eigen::Index>(j));
    if (a != 0.0) mean += a * seen[j].mean();
  }
  switch (mode) {
    case CovarianceMode::Unit: return GaussianSignature::unit(std::move(mean));
    case CovarianceMode::Diagonal: {
      Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
      for (std::size_t j = 0; j < seen.size(); ++j) {
        const double a = code.coefficients(static_cast<Eigen::Index>(j));
        if (a != 0.0) var += a * seen[j].variances();
      }
      return GaussianSignature::diagonal(std::move(mean), var.cwiseMax(ridge));
    }
    case CovarianceMode::Full: {
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t j = 0; j < seen.size(); ++j) {
        const double a = code.coefficients(static_cast<Eigen::Index>(j));
        if (a != 0.0) cov += a * seen[j].covariance();
      }
      cov = 0.5 * (cov + cov.transpose());
      return GaussianSignature::full(std::move(mean), floor_eigenvalues(cov, ridge));
    }
  }
  throw NumericalError("unknown covariance mode");
}

Synthesis synthesize_all(const Eigen::MatrixXd& seen_embeddings, const Eigen::MatrixXd& unseen_embeddings,
                         std::span<const GaussianSignature> seen_signatures, const LassoOptions& lasso,
                         CovarianceMode mode, double ridge) {
  if (seen_embeddings.cols() != unseen_embeddings.cols()) {
    throw NumericalError("seen and unseen embeddings differ in dimension");
  }
  if (static_cast<std::size_t>(seen_embeddings.rows()) != seen_signatures.size()) {
    throw NumericalError("one seen signature per seen embedding row is required");
  }
  const Eigen::MatrixXd dictionary = seen_embeddings.transpose();
  Synthesis out;
  const auto unseen = static_cast<std::size_t>(unseen_embeddings.rows());
  out.codes.reserve(unseen);
  out.signatures.reserve(unseen);
  out.fallback.assign(unseen, false);
  for (std::size_t u = 0; u < unseen; ++u) {
    out.codes.push_back(solve_lasso(dictionary, unseen_embeddings.row(static_cast<Eigen::Index>(u)).transpose(), lasso));
    try {
      out.signatures.push_back(synthesize_signature(seen_signatures, out.codes.back(), mode, ridge));
    } catch (const DegenerateCodeError&) {
      SparseCode average;
      average.coefficients = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(seen_signatures.size()),
                                                       1.0 / static_cast<double>(seen_signatures.size()));
      out.signatures.push_back(synthesize_signature(seen_signatures, average, mode, ridge));
      out.fallback[u] = true;
    }
  }
  return out;
}

nlohmann::json codes_to_json(const Synthesis& synthesis, std::span<const ClassId> seen_ids,
                             std::span<const ClassId> unseen_ids, std::span<const std::string> class_names) {
  nlohmann::json doc = nlohmann::json::object();
  for (std::size_t u = 0; u < synthesis.codes.size() && u < unseen_ids.size(); ++u) {
    nlohmann::json pairs = nlohmann::json::array();
    const auto& a = synthesis.codes[u].coefficients;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      if (a(j) == 0.0) continue;
      pairs.push_back({class_names[static_cast<std::size_t>(seen_ids[static_cast<std::size_t>(j)])], a(j)});
    }
    doc[class_names[static_cast<std::size_t>(unseen_ids[u])]] = std::move(pairs);
  }
  return doc;
}

}  // namespace zslgmm

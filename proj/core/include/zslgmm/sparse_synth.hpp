#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "zslgmm/error.hpp"
#include "zslgmm/signatures.hpp"

namespace zslgmm {

struct LassoOptions {
  double lambda = 0.1;
  /// Stop once no coordinate moves by more than this in a sweep.
  double tol = 1e-10;
  int max_iters = 100000;
  /// Keep the objective after every sweep in SparseCode::sweep_objectives.
  bool record_history = false;
};

/// Reconstruction coefficients of one target over the dictionary columns.
struct SparseCode {
  Eigen::VectorXd coefficients;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> sweep_objectives;

  std::vector<Eigen::Index> support() const;
};

/// Magnitudes below this are stored as exact zeros.
inline constexpr double kCoefficientDeadZone = 1e-12;

/// ||target - D a||^2 + lambda * ||a||_1 (no 1/2 factor, no sample scaling).
double lasso_objective(const Eigen::MatrixXd& dictionary, const Eigen::VectorXd& target,
                       const Eigen::VectorXd& coefficients, double lambda);

/// Cyclic coordinate descent with soft-thresholding. The update for
/// coordinate j is a_j = S(c_j, lambda/2) / ||d_j||^2 with
/// c_j = d_j^T (target - sum_{i != j} d_i a_i); the lambda/2 comes from the
/// unhalved quadratic. Hitting max_iters returns with converged = false.
SparseCode solve_lasso(const Eigen::MatrixXd& dictionary, const Eigen::VectorXd& target,
                       const LassoOptions& options = {});

/// Raised by synthesize_signature when every coefficient is zero.
class DegenerateCodeError : public Error {
public:
  using Error::Error;
};

/// Linear transfer of the code onto seen signatures: the mean is sum a_j mu_j;
/// Diagonal variances are sum a_j v_j floored at `ridge`; Full covariance is
/// sum a_j Sigma_j symmetrized with eigenvalues floored at `ridge`; Unit
/// stays the identity.
GaussianSignature synthesize_signature(std::span<const GaussianSignature> seen, const SparseCode& code,
                                       CovarianceMode mode, double ridge);

struct Synthesis {
  std::vector<SparseCode> codes;
  std::vector<GaussianSignature> signatures;
  /// True where the code was all-zero and the seen average was used instead.
  std::vector<bool> fallback;
};

/// Solves one lasso per unseen embedding row over the seen embedding rows and
/// transfers each code. Embedding matrices are one row per class.
Synthesis synthesize_all(const Eigen::MatrixXd& seen_embeddings, const Eigen::MatrixXd& unseen_embeddings,
                         std::span<const GaussianSignature> seen_signatures, const LassoOptions& lasso,
                         CovarianceMode mode, double ridge);

/// {"<unseen class>": [["<seen class>", coefficient], ...], ...}, nonzero
/// coefficients only.
nlohmann::json codes_to_json(const Synthesis& synthesis, std::span<const ClassId> seen_ids,
                             std::span<const ClassId> unseen_ids, std::span<const std::string> class_names);

}  // namespace zslgmm

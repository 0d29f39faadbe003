#include "zslgmm/gmm_em.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "csv.hpp"
#include "zslgmm/error.hpp"

namespace zslgmm {
namespace {

constexpr double kCollapseMass = 1e-8;

void check_shapes(const MixtureModel& model, const Eigen::MatrixXd& X) {
  if (model.components.empty()) throw NumericalError("mixture has no components");
  if (X.cols() != model.dim()) {
    throw NumericalError("points have dimension " + std::to_string(X.cols()) + ", mixture has " +
                         std::to_string(model.dim()));
  }
  if (model.weights.size() != model.size()) throw NumericalError("mixture weight count mismatch");
}

// Row-wise log-sum-exp of a finite-or-(-inf) matrix.
Eigen::VectorXd row_logsumexp(const Eigen::MatrixXd& L) {
  Eigen::VectorXd out(L.rows());
  for (Eigen::Index n = 0; n < L.rows(); ++n) {
    const double m = L.row(n).maxCoeff();
    if (!std::isfinite(m)) {
      out(n) = m;
      continue;
    }
    out(n) = m + std::log((L.row(n).array() - m).exp().sum());
  }
  return out;
}

Eigen::MatrixXd floor_spectrum(const Eigen::MatrixXd& sym, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in M-step");
  if (eig.eigenvalues().minCoeff() >= floor) return sym;
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

GaussianSignature component_from_moments(CovarianceMode mode, Eigen::VectorXd mean, const Eigen::MatrixXd& centered,
                                         const Eigen::VectorXd& weights, double mass, double ridge, ClassId id) {
  switch (mode) {
    case CovarianceMode::Unit: return GaussianSignature::unit(std::move(mean), id);
    case CovarianceMode::Diagonal: {
      Eigen::VectorXd var = (centered.array().square().colwise() * weights.array()).colwise().sum().transpose() / mass;
      return GaussianSignature::diagonal(std::move(mean), var.cwiseMax(ridge), id);
    }
    case CovarianceMode::Full: {
      const Eigen::MatrixXd weighted = centered.array().colwise() * weights.array();
      Eigen::MatrixXd cov = weighted.transpose() * centered / mass;
      cov = 0.5 * (cov + cov.transpose());
      return GaussianSignature::full(std::move(mean), floor_spectrum(cov, ridge), id);
    }
  }
  throw NumericalError("unknown covariance mode");
}

}  // namespace

MixtureModel init_mixture(std::vector<GaussianSignature> components) {
  if (components.empty()) throw NumericalError("cannot build a mixture from zero signatures");
  const Eigen::Index d = components.front().dim();
  const CovarianceMode mode = components.front().mode();
  for (const auto& c : components) {
    if (c.dim() != d) throw NumericalError("mixture components differ in dimension");
    if (c.mode() != mode) throw NumericalError("mixture components differ in covariance mode");
  }
  MixtureModel model;
  model.mode = mode;
  model.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(components.size()),
                                            1.0 / static_cast<double>(components.size()));
  model.components = std::move(components);
  return model;
}

Eigen::MatrixXd weighted_log_densities(const MixtureModel& model, const Eigen::MatrixXd& X) {
  check_shapes(model, X);
  Eigen::MatrixXd L(X.rows(), model.size());
  for (Eigen::Index k = 0; k < model.size(); ++k) {
    const double log_weight = model.weights(k) > 0.0 ? std::log(model.weights(k))
                                                     : -std::numeric_limits<double>::infinity();
    L.col(k) = (model.components[static_cast<std::size_t>(k)].log_density_rows(X).array() + log_weight).matrix();
  }
  return L;
}

double log_likelihood(const MixtureModel& model, const Eigen::MatrixXd& X) {
  const Eigen::VectorXd per_row = row_logsumexp(weighted_log_densities(model, X));
  for (Eigen::Index n = 0; n < per_row.size(); ++n) {
    if (!std::isfinite(per_row(n))) throw NumericalError("non-finite log-likelihood at row " + std::to_string(n));
  }
  return per_row.sum();
}

EStep e_step(const MixtureModel& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd L = weighted_log_densities(model, X);
  const Eigen::VectorXd norm = row_logsumexp(L);
  EStep out;
  out.responsibilities.resize(L.rows(), L.cols());
  for (Eigen::Index n = 0; n < L.rows(); ++n) {
    if (!std::isfinite(norm(n))) throw NumericalError("non-finite log-likelihood at row " + std::to_string(n));
    out.responsibilities.row(n) = (L.row(n).array() - norm(n)).exp();
    // Renormalize the rounding error away.
    out.responsibilities.row(n) /= out.responsibilities.row(n).sum();
  }
  out.log_likelihood = norm.sum();
  return out;
}

MStep m_step(const MixtureModel& model, const Eigen::MatrixXd& X, const Eigen::MatrixXd& r, double ridge) {
  check_shapes(model, X);
  if (r.rows() != X.rows() || r.cols() != model.size()) throw NumericalError("responsibility shape mismatch");
  if (!(ridge > 0.0)) throw NumericalError("ridge must be positive");
  const auto n = static_cast<double>(X.rows());
  const Eigen::VectorXd mass = r.colwise().sum().transpose();

  MStep out;
  out.model.mode = model.mode;
  out.model.weights = mass / n;
  out.model.components.reserve(model.components.size());
  std::vector<Eigen::Index> collapsed;
  for (Eigen::Index k = 0; k < model.size(); ++k) {
    const ClassId id = model.components[static_cast<std::size_t>(k)].class_id();
    if (!(mass(k) >= kCollapseMass)) {
      collapsed.push_back(k);
      out.model.components.push_back(model.components[static_cast<std::size_t>(k)]);
      continue;
    }
    const Eigen::VectorXd weights = r.col(k);
    Eigen::VectorXd mean = X.transpose() * weights / mass(k);
    const Eigen::MatrixXd centered = X.rowwise() - mean.transpose();
    out.model.components.push_back(component_from_moments(model.mode, std::move(mean), centered, weights, mass(k), ridge, id));
  }

  if (!collapsed.empty()) {
    // Reseed each collapsed component at the point the current model explains
    // worst, with the pooled spread, and give it a 1/N share of the weight.
    const Eigen::VectorXd best_resp = r.rowwise().maxCoeff();
    std::vector<char> used(static_cast<std::size_t>(X.rows()), 0);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X.rows());
    const Eigen::VectorXd global_mean = X.colwise().mean().transpose();
    const Eigen::MatrixXd global_centered = X.rowwise() - global_mean.transpose();
    for (Eigen::Index k : collapsed) {
      Eigen::Index pick = -1;
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        if (pick < 0 || best_resp(i) < best_resp(pick)) pick = i;
      }
      if (pick < 0) pick = 0;
      used[static_cast<std::size_t>(pick)] = 1;
      const ClassId id = model.components[static_cast<std::size_t>(k)].class_id();
      GaussianSignature pooled =
          component_from_moments(model.mode, global_mean, global_centered, ones, n, ridge, id);
      Eigen::VectorXd mean = X.row(pick).transpose();
      switch (model.mode) {
        case CovarianceMode::Unit: out.model.components[static_cast<std::size_t>(k)] = GaussianSignature::unit(mean, id); break;
        case CovarianceMode::Diagonal:
          out.model.components[static_cast<std::size_t>(k)] = GaussianSignature::diagonal(mean, pooled.variances(), id);
          break;
        case CovarianceMode::Full:
          out.model.components[static_cast<std::size_t>(k)] = GaussianSignature::full(mean, pooled.covariance(), id);
          break;
      }
      out.model.weights(k) = 1.0 / n;
      ++out.reseeded;
    }
  }
  out.model.weights /= out.model.weights.sum();
  return out;
}

FitResult fit(MixtureModel model, const Eigen::MatrixXd& X, const EmOptions& options) {
  if (!(options.tol > 0.0)) throw NumericalError("EM tolerance must be positive");
  if (options.max_iters < 1) throw NumericalError("EM max_iters must be at least 1");
  FitResult result;
  FitTrace& trace = result.trace;
  for (;;) {
    EStep e = e_step(model, X);
    trace.log_likelihood.push_back(e.log_likelihood);
    const std::size_t t = trace.log_likelihood.size();
    if (t >= 2) {
      const double change = std::abs(trace.log_likelihood[t - 1] - trace.log_likelihood[t - 2]);
      if (change < options.tol * std::abs(trace.log_likelihood[t - 1])) {
        trace.converged = true;
        break;
      }
    }
    if (trace.iterations >= options.max_iters) break;
    MStep m = m_step(model, X, e.responsibilities, options.ridge);
    model = std::move(m.model);
    trace.reseeded += m.reseeded;
    ++trace.iterations;
  }
  result.model = std::move(model);
  return result;
}

std::vector<int> predict(const MixtureModel& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd L = weighted_log_densities(model, X);
  std::vector<int> labels(static_cast<std::size_t>(X.rows()), 0);
  for (Eigen::Index n = 0; n < L.rows(); ++n) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < L.cols(); ++k) {
      if (L(n, k) > L(n, best)) best = k;
    }
    labels[static_cast<std::size_t>(n)] = static_cast<int>(best);
  }
  return labels;
}

CovarianceMode choose_covariance_mode(double min_class_size, Eigen::Index dim, double threshold) {
  const auto d = static_cast<double>(dim);
  if (min_class_size < d) return CovarianceMode::Unit;
  if (min_class_size < threshold * d * d) return CovarianceMode::Diagonal;
  return CovarianceMode::Full;
}

std::string trace_to_csv(const FitTrace& trace) {
  std::ostringstream out;
  out << "iteration,log_likelihood\n";
  for (std::size_t i = 0; i < trace.log_likelihood.size(); ++i) {
    out << i << ',' << detail::format_double(trace.log_likelihood[i]) << '\n';
  }
  return out.str();
}

nlohmann::json model_to_json(const MixtureModel& model) {
  nlohmann::json doc;
  doc["mode"] = std::string(to_string(model.mode));
  doc["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : model.components) comps.push_back(to_json(c));
  doc["components"] = std::move(comps);
  return doc;
}

MixtureModel model_from_json(const nlohmann::json& doc) {
  std::vector<GaussianSignature> comps;
  for (const auto& c : doc.at("components")) comps.push_back(signature_from_json(c));
  MixtureModel model = init_mixture(std::move(comps));
  const auto w = doc.at("weights").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != model.size()) throw DataError("weights do not match components");
  model.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return model;
}

}  // namespace zslgmm

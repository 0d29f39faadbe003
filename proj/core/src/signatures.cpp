#include "zslgmm/signatures.hpp"

#include <cmath>
#include <numbers>

#include "zslgmm/error.hpp"

namespace zslgmm {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::string class_tag(ClassId id) {
  return id >= 0 ? "class " + std::to_string(id) : std::string("unlabelled signature");
}

}  // namespace

std::string_view to_string(CovarianceMode mode) {
  switch (mode) {
    case CovarianceMode::Full: return "full";
    case CovarianceMode::Diagonal: return "diagonal";
    case CovarianceMode::Unit: return "unit";
  }
  return "unit";
}

CovarianceMode parse_covariance_mode(std::string_view text) {
  if (text == "full") return CovarianceMode::Full;
  if (text == "diagonal" || text == "diag") return CovarianceMode::Diagonal;
  if (text == "unit") return CovarianceMode::Unit;
  throw ConfigError("unknown covariance mode '" + std::string(text) + "' (expected full, diagonal or unit)");
}

GaussianSignature GaussianSignature::unit(Eigen::VectorXd mean, ClassId class_id) {
  if (!mean.allFinite()) throw NumericalError(class_tag(class_id) + ": non-finite mean");
  GaussianSignature s;
  s.mode_ = CovarianceMode::Unit;
  s.class_id_ = class_id;
  s.log_normalizer_ = -0.5 * static_cast<double>(mean.size()) * kLog2Pi;
  s.mean_ = std::move(mean);
  return s;
}

GaussianSignature GaussianSignature::diagonal(Eigen::VectorXd mean, Eigen::VectorXd variances, ClassId class_id) {
  if (mean.size() != variances.size()) throw NumericalError(class_tag(class_id) + ": variance length mismatch");
  if (!mean.allFinite()) throw NumericalError(class_tag(class_id) + ": non-finite mean");
  if (!variances.allFinite() || (variances.array() <= 0.0).any()) {
    throw NumericalError(class_tag(class_id) + ": diagonal covariance must be positive");
  }
  GaussianSignature s;
  s.mode_ = CovarianceMode::Diagonal;
  s.class_id_ = class_id;
  s.log_normalizer_ = -0.5 * (static_cast<double>(mean.size()) * kLog2Pi + variances.array().log().sum());
  s.mean_ = std::move(mean);
  s.variances_ = std::move(variances);
  return s;
}

GaussianSignature GaussianSignature::full(Eigen::VectorXd mean, Eigen::MatrixXd covariance, ClassId class_id) {
  const Eigen::Index d = mean.size();
  if (covariance.rows() != d || covariance.cols() != d) {
    throw NumericalError(class_tag(class_id) + ": covariance shape mismatch");
  }
  if (!mean.allFinite() || !covariance.allFinite()) {
    throw NumericalError(class_tag(class_id) + ": non-finite signature");
  }
  const double asym = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if (asym > 1e-10 * scale) throw NumericalError(class_tag(class_id) + ": covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(class_tag(class_id) + ": covariance is not positive definite");
  }
  GaussianSignature s;
  s.mode_ = CovarianceMode::Full;
  s.class_id_ = class_id;
  s.cholesky_ = llt.matrixL();
  const Eigen::VectorXd diag = s.cholesky_.diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) {
    throw NumericalError(class_tag(class_id) + ": covariance is not positive definite");
  }
  s.log_normalizer_ = -0.5 * static_cast<double>(d) * kLog2Pi - diag.array().log().sum();
  s.mean_ = std::move(mean);
  s.covariance_ = std::move(covariance);
  return s;
}

GaussianSignature GaussianSignature::with_class_id(ClassId id) const {
  GaussianSignature copy = *this;
  copy.class_id_ = id;
  return copy;
}

Eigen::MatrixXd GaussianSignature::dense_covariance() const {
  switch (mode_) {
    case CovarianceMode::Full: return covariance_;
    case CovarianceMode::Diagonal: return variances_.asDiagonal();
    case CovarianceMode::Unit: break;
  }
  return Eigen::MatrixXd::Identity(dim(), dim());
}

double GaussianSignature::log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) {
    throw NumericalError(class_tag(class_id_) + ": point has dimension " + std::to_string(x.size()) +
                         ", signature has " + std::to_string(dim()));
  }
  const Eigen::VectorXd diff = x - mean_;
  double quad = 0.0;
  switch (mode_) {
    case CovarianceMode::Unit: quad = diff.squaredNorm(); break;
    case CovarianceMode::Diagonal: quad = (diff.array().square() / variances_.array()).sum(); break;
    case CovarianceMode::Full:
      quad = cholesky_.triangularView<Eigen::Lower>().solve(diff).squaredNorm();
      break;
  }
  return log_normalizer_ - 0.5 * quad;
}

Eigen::VectorXd GaussianSignature::log_density_rows(const Eigen::MatrixXd& X) const {
  if (X.cols() != dim()) {
    throw NumericalError(class_tag(class_id_) + ": points have dimension " + std::to_string(X.cols()) +
                         ", signature has " + std::to_string(dim()));
  }
  const Eigen::MatrixXd diff = X.rowwise() - mean_.transpose();
  Eigen::VectorXd quad;
  switch (mode_) {
    case CovarianceMode::Unit: quad = diff.rowwise().squaredNorm(); break;
    case CovarianceMode::Diagonal:
      quad = (diff.array().square().rowwise() / variances_.transpose().array()).rowwise().sum();
      break;
    case CovarianceMode::Full: {
      const Eigen::MatrixXd z = cholesky_.triangularView<Eigen::Lower>().solve(diff.transpose());
      quad = z.colwise().squaredNorm().transpose();
      break;
    }
  }
  return (log_normalizer_ - 0.5 * quad.array()).matrix();
}

double default_ridge(const Eigen::MatrixXd& X) {
  if (X.rows() < 1 || X.cols() < 1) return 1e-4;
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const double mean_variance =
      (X.rowwise() - mean).array().square().colwise().sum().mean() / static_cast<double>(X.rows());
  return mean_variance > 0.0 ? 1e-4 * mean_variance : 1e-4;
}

std::vector<GaussianSignature> estimate_signatures(const Eigen::MatrixXd& X, std::span<const ClassId> labels,
                                                   CovarianceMode mode, double ridge) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
    throw NumericalError("label count does not match rows of X");
  }
  if (!(ridge > 0.0) || !std::isfinite(ridge)) throw NumericalError("ridge must be positive");
  if (!X.allFinite()) throw NumericalError("signature estimation input contains non-finite values");
  if (labels.empty()) throw NumericalError("no instances to estimate signatures from");

  ClassId max_label = -1;
  for (ClassId y : labels) {
    if (y < 0) throw NumericalError("negative class id in labels");
    max_label = std::max(max_label, y);
  }
  const auto classes = static_cast<std::size_t>(max_label + 1);
  const Eigen::Index d = X.cols();
  std::vector<Eigen::Index> counts(classes, 0);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes), d);
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    const auto k = static_cast<std::size_t>(labels[static_cast<std::size_t>(n)]);
    ++counts[k];
    sums.row(static_cast<Eigen::Index>(k)) += X.row(n);
  }

  std::vector<GaussianSignature> out;
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] == 0) continue;
    const auto id = static_cast<ClassId>(k);
    const double nk = static_cast<double>(counts[k]);
    Eigen::VectorXd mean = sums.row(static_cast<Eigen::Index>(k)).transpose() / nk;
    if (mode == CovarianceMode::Unit) {
      out.push_back(GaussianSignature::unit(std::move(mean), id));
      continue;
    }
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
    for (Eigen::Index n = 0; n < X.rows(); ++n) {
      if (labels[static_cast<std::size_t>(n)] != id) continue;
      const Eigen::VectorXd diff = X.row(n).transpose() - mean;
      if (mode == CovarianceMode::Full) {
        scatter.selfadjointView<Eigen::Lower>().rankUpdate(diff);
      } else {
        sq += diff.cwiseAbs2();
      }
    }
    if (mode == CovarianceMode::Full) {
      Eigen::MatrixXd cov = scatter.selfadjointView<Eigen::Lower>();
      cov /= nk;
      cov.diagonal().array() += ridge;
      out.push_back(GaussianSignature::full(std::move(mean), std::move(cov), id));
    } else {
      Eigen::VectorXd var = sq / nk;
      var.array() += ridge;
      out.push_back(GaussianSignature::diagonal(std::move(mean), std::move(var), id));
    }
  }
  return out;
}

std::vector<int> classify_max_density(std::span<const GaussianSignature> signatures, const Eigen::MatrixXd& X) {
  if (signatures.empty()) throw NumericalError("no signatures to classify with");
  Eigen::MatrixXd scores(X.rows(), static_cast<Eigen::Index>(signatures.size()));
  for (std::size_t k = 0; k < signatures.size(); ++k) {
    scores.col(static_cast<Eigen::Index>(k)) = signatures[k].log_density_rows(X);
  }
  std::vector<int> out(static_cast<std::size_t>(X.rows()), 0);
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k) {
      if (scores(n, k) > scores(n, best)) best = k;
    }
    out[static_cast<std::size_t>(n)] = static_cast<int>(best);
  }
  return out;
}

nlohmann::json to_json(const GaussianSignature& s) {
  nlohmann::json doc;
  doc["class_id"] = s.class_id();
  doc["mode"] = std::string(to_string(s.mode()));
  doc["mean"] = std::vector<double>(s.mean().data(), s.mean().data() + s.mean().size());
  switch (s.mode()) {
    case CovarianceMode::Unit: doc["covariance"] = nullptr; break;
    case CovarianceMode::Diagonal:
      doc["covariance"] = std::vector<double>(s.variances().data(), s.variances().data() + s.variances().size());
      break;
    case CovarianceMode::Full: {
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index r = 0; r < s.dim(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(s.dim()));
        for (Eigen::Index c = 0; c < s.dim(); ++c) row[static_cast<std::size_t>(c)] = s.covariance()(r, c);
        rows.push_back(std::move(row));
      }
      doc["covariance"] = std::move(rows);
      break;
    }
  }
  return doc;
}

GaussianSignature signature_from_json(const nlohmann::json& doc) {
  try {
    const auto mean_values = doc.at("mean").get<std::vector<double>>();
    Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(mean_values.data(), static_cast<Eigen::Index>(mean_values.size()));
    const ClassId id = doc.value("class_id", -1);
    const CovarianceMode mode = parse_covariance_mode(doc.at("mode").get<std::string>());
    switch (mode) {
      case CovarianceMode::Unit: return GaussianSignature::unit(std::move(mean), id);
      case CovarianceMode::Diagonal: {
        const auto v = doc.at("covariance").get<std::vector<double>>();
        return GaussianSignature::diagonal(std::move(mean),
                                           Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())), id);
      }
      case CovarianceMode::Full: {
        const auto rows = doc.at("covariance").get<std::vector<std::vector<double>>>();
        const auto d = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd cov(d, d);
        for (Eigen::Index r = 0; r < d; ++r) {
          if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != d) {
            throw DataError("signature covariance is not square");
          }
          for (Eigen::Index c = 0; c < d; ++c) cov(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        return GaussianSignature::full(std::move(mean), std::move(cov), id);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed signature JSON: ") + e.what());
  }
  throw DataError("malformed signature JSON");
}

}  // namespace zslgmm

#include "zslgmm/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "zslgmm/error.hpp"
#include "zslgmm/rng.hpp"

namespace zslgmm {
namespace {

constexpr int kPlacementAttempts = 20000;

Eigen::VectorXd random_unit(CounterRng& rng, Eigen::Index dim) {
  Eigen::VectorXd v(dim);
  for (;;) {
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.normal();
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
}

}  // namespace

EmbeddingFidelity parse_fidelity(std::string_view text) {
  if (text == "exact-linear" || text == "exact") return EmbeddingFidelity::ExactLinear;
  if (text == "noisy") return EmbeddingFidelity::Noisy;
  throw ConfigError("unknown embedding fidelity '" + std::string(text) + "' (expected exact-linear or noisy)");
}

std::string_view to_string(EmbeddingFidelity fidelity) {
  return fidelity == EmbeddingFidelity::ExactLinear ? "exact-linear" : "noisy";
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2 || spec.per_class < 1 || spec.feature_dim < 1 || spec.embedding_dim < 1) {
    throw ConfigError("synthetic generator needs classes >= 2 and positive per-class count and dimensions");
  }
  if (spec.embedding_dim < spec.feature_dim) {
    throw ConfigError("synthetic embedding_dim must be at least feature_dim for a linear embedding");
  }
  if (spec.separation < 0.0 || !(spec.sigma > 0.0) || spec.noise < 0.0) {
    throw ConfigError("synthetic separation and noise must be non-negative and sigma positive");
  }

  const CounterRng root(spec.seed);
  CounterRng placement = root.substream("synthetic/means");
  CounterRng map_rng = root.substream("synthetic/embedding-map");
  CounterRng noise_rng = root.substream("synthetic/embedding-noise");
  CounterRng sample_rng = root.substream("synthetic/instances");

  const Eigen::Index d = spec.feature_dim;
  const Eigen::Index k_count = spec.classes;
  SyntheticData out;
  out.radius = spec.separation * spec.sigma;
  out.directions.resize(k_count, d);

  // Unit directions pairwise >= 1 apart (60 degrees), by sequential rejection.
  // With zero separation every mean is the origin and no spacing is needed.
  const double min_gap = spec.separation > 0.0 ? 1.0 : 0.0;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const Eigen::VectorXd v = random_unit(placement, d);
      placed = true;
      for (Eigen::Index j = 0; j < k; ++j) {
        if ((out.directions.row(j).transpose() - v).norm() < min_gap) {
          placed = false;
          break;
        }
      }
      if (placed) out.directions.row(k) = v.transpose();
    }
    if (!placed) {
      throw Error("cannot place " + std::to_string(k_count) + " class means " + std::to_string(spec.separation) +
                  " sigma apart in " + std::to_string(d) + " dimensions");
    }
  }
  out.means = out.radius * out.directions;

  Eigen::MatrixXd gaussian(spec.embedding_dim, d);
  for (Eigen::Index r = 0; r < gaussian.rows(); ++r) {
    for (Eigen::Index c = 0; c < d; ++c) gaussian(r, c) = map_rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  out.embedding_map = qr.householderQ() * Eigen::MatrixXd::Identity(spec.embedding_dim, d);

  ZslDataset& data = out.dataset;
  data.embeddings = out.directions * out.embedding_map.transpose();
  if (spec.fidelity == EmbeddingFidelity::Noisy && spec.noise > 0.0) {
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const Eigen::VectorXd xi = random_unit(noise_rng, spec.embedding_dim);
      data.embeddings.row(k) += spec.noise * data.embeddings.row(k).norm() * xi.transpose();
      data.embeddings.row(k).normalize();
    }
  }

  const int width = k_count > 100 ? 3 : 2;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "c%0*d", width, static_cast<int>(k));
    data.class_names.emplace_back(name);
  }
  const Eigen::Index n = k_count * spec.per_class;
  data.features.resize(n, d);
  data.labels.reserve(static_cast<std::size_t>(n));
  data.instance_ids.reserve(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    for (int i = 0; i < spec.per_class; ++i, ++row) {
      for (Eigen::Index c = 0; c < d; ++c) data.features(row, c) = out.means(k, c) + spec.sigma * sample_rng.normal();
      data.labels.push_back(static_cast<ClassId>(k));
      data.instance_ids.push_back("x" + std::to_string(row));
    }
  }
  data.validate();
  return out;
}

nlohmann::json synthetic_manifest(const SyntheticSpec& spec, const SyntheticData& data) {
  nlohmann::json doc;
  doc["generator"] = {
      {"classes", spec.classes},         {"per_class", spec.per_class},
      {"feature_dim", spec.feature_dim}, {"embedding_dim", spec.embedding_dim},
      {"separation", spec.separation},   {"sigma", spec.sigma},
      {"fidelity", std::string(to_string(spec.fidelity))},
      {"noise", spec.noise},             {"seed", spec.seed},
      {"rng", std::string(CounterRng::kVersion)},
  };
  doc["radius"] = data.radius;
  nlohmann::json means = nlohmann::json::object();
  for (Eigen::Index k = 0; k < data.means.rows(); ++k) {
    std::vector<double> row(static_cast<std::size_t>(data.means.cols()));
    for (Eigen::Index c = 0; c < data.means.cols(); ++c) row[static_cast<std::size_t>(c)] = data.means(k, c);
    means[data.dataset.class_names[static_cast<std::size_t>(k)]] = std::move(row);
  }
  doc["means"] = std::move(means);
  nlohmann::json map = nlohmann::json::array();
  for (Eigen::Index r = 0; r < data.embedding_map.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(data.embedding_map.cols()));
    for (Eigen::Index c = 0; c < data.embedding_map.cols(); ++c) row[static_cast<std::size_t>(c)] = data.embedding_map(r, c);
    map.push_back(std::move(row));
  }
  doc["embedding_map"] = std::move(map);
  return doc;
}

}  // namespace zslgmm

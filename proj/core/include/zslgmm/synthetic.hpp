#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "zslgmm/dataset.hpp"

namespace zslgmm {

enum class EmbeddingFidelity { ExactLinear, Noisy };

struct SyntheticSpec {
  int classes = 12;
  int per_class = 100;
  int feature_dim = 10;
  int embedding_dim = 16;
  /// Minimum pairwise distance between class means, in units of sigma.
  double separation = 6.0;
  double sigma = 1.0;
  EmbeddingFidelity fidelity = EmbeddingFidelity::ExactLinear;
  /// Norm of the embedding perturbation relative to the (unit) embedding norm.
  double noise = 0.2;
  std::uint64_t seed = 0;
};

/// A generated dataset plus the parameters that produced it.
struct SyntheticData {
  ZslDataset dataset;
  Eigen::MatrixXd means;          // classes x feature_dim
  Eigen::MatrixXd directions;     // unit rows, means = radius * directions
  Eigen::MatrixXd embedding_map;  // embedding_dim x feature_dim, orthonormal columns
  double radius = 0.0;
};

/// Class means sit on a sphere of radius separation * sigma, at random
/// directions at least 60 degrees apart, so every pair of means is at least
/// separation * sigma apart. Instances are isotropic Gaussians with standard
/// deviation sigma. Embedding k is W * direction_k for a random W with
/// orthonormal columns, so embeddings have unit norm and any linear relation
/// among embeddings is the same relation among means. The Noisy fidelity adds
/// a random perturbation of norm `noise` and renormalizes.
///
/// Throws Error when the directions cannot be placed (too many classes for
/// the dimension), or when embedding_dim < feature_dim.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

nlohmann::json synthetic_manifest(const SyntheticSpec& spec, const SyntheticData& data);

EmbeddingFidelity parse_fidelity(std::string_view text);
std::string_view to_string(EmbeddingFidelity fidelity);

}  // namespace zslgmm

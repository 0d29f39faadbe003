#pragma once

#include <random>
#include <vector>

#include <Eigen/Cholesky>

#include "oracles.hpp"
#include "zslgmm/gmm_em.hpp"

namespace fixtures {

struct EmProblem {
  Eigen::MatrixXd X;
  zslgmm::MixtureModel init;
};

/// K Gaussian clusters with random means and covariances in d dimensions,
/// and a starting mixture centred on K random data points.
inline EmProblem em_problem(std::uint64_t seed, int d, int k, zslgmm::CovarianceMode mode) {
  std::mt19937_64 gen(seed);
  const int per = 30 + 2 * d;
  EmProblem p;
  p.X.resize(k * per, d);
  for (int c = 0; c < k; ++c) {
    const Eigen::VectorXd mean = oracle::gaussian_matrix(gen, d, 1, 3.0);
    const Eigen::MatrixXd cov = oracle::random_spd(gen, d, 0.3, 2.0);
    const Eigen::MatrixXd root = cov.llt().matrixL();
    for (int i = 0; i < per; ++i) {
      p.X.row(c * per + i) = (mean + root * oracle::gaussian_matrix(gen, d, 1)).transpose();
    }
  }
  std::uniform_int_distribution<int> pick(0, k * per - 1);
  std::vector<zslgmm::GaussianSignature> comps;
  for (int c = 0; c < k; ++c) {
    const Eigen::VectorXd at = p.X.row(pick(gen)).transpose();
    switch (mode) {
      case zslgmm::CovarianceMode::Unit: comps.push_back(zslgmm::GaussianSignature::unit(at, c)); break;
      case zslgmm::CovarianceMode::Diagonal:
        comps.push_back(zslgmm::GaussianSignature::diagonal(at, Eigen::VectorXd::Ones(d), c));
        break;
      case zslgmm::CovarianceMode::Full:
        comps.push_back(zslgmm::GaussianSignature::full(at, Eigen::MatrixXd::Identity(d, d), c));
        break;
    }
  }
  p.init = zslgmm::init_mixture(std::move(comps));
  return p;
}

}  // namespace fixtures

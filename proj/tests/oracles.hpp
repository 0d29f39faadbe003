#pragma once

// Reference computations used only by the tests. They share no code with the
// library and trade speed for directness.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace oracle {

/// Cyclic Jacobi rotations on a symmetric matrix. Eigenvalues descending,
/// eigenvectors as columns.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  Eigen::VectorXd values(n);
  Eigen::MatrixXd vectors(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return {values, vectors};
}

/// Gauss-Jordan inverse with partial pivoting; also returns ln|det|.
inline std::pair<Eigen::MatrixXd, double> inverse_and_logdet(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd a = m;
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
  double logdet = 0.0;
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    a.row(col).swap(a.row(pivot));
    inv.row(col).swap(inv.row(pivot));
    const double p = a(col, col);
    logdet += std::log(std::abs(p));
    a.row(col) /= p;
    inv.row(col) /= p;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      a.row(r) -= f * a.row(col);
      inv.row(r) -= f * inv.row(col);
    }
  }
  return {inv, logdet};
}

/// Multivariate normal log-density through an explicit inverse.
inline double normal_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const auto [inv, logdet] = inverse_and_logdet(cov);
  const Eigen::VectorXd diff = x - mean;
  double quad = 0.0;
  for (Eigen::Index i = 0; i < diff.size(); ++i)
    for (Eigen::Index j = 0; j < diff.size(); ++j) quad += diff(i) * inv(i, j) * diff(j);
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

/// Solves the normal equations D^T D a = D^T e by Gaussian elimination.
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& d, const Eigen::VectorXd& e) {
  const auto [inv, logdet] = inverse_and_logdet(d.transpose() * d);
  (void)logdet;
  return inv * (d.transpose() * e);
}

inline double lasso_objective(const Eigen::MatrixXd& d, const Eigen::VectorXd& e, const Eigen::VectorXd& a,
                              double lambda) {
  return (e - d * a).squaredNorm() + lambda * a.cwiseAbs().sum();
}

struct LassoMinimum {
  Eigen::VectorXd coefficients;
  double objective = 0.0;
  bool on_boundary = false;
};

/// Exhaustive grid over [-bound, bound]^k, then pattern search from the best
/// grid point along every {-1, 0, 1}^k direction with halving steps.
inline LassoMinimum brute_force_lasso(const Eigen::MatrixXd& d, const Eigen::VectorXd& e, double lambda,
                                      double bound = 3.0, double step = 0.02) {
  const auto k = static_cast<int>(d.cols());
  const int per_axis = static_cast<int>(std::lround(2.0 * bound / step)) + 1;
  int total = 1;
  for (int i = 0; i < k; ++i) total *= per_axis;
  Eigen::VectorXd a(k), best(k);
  double best_obj = std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < total; ++idx) {
    int rest = idx;
    for (int i = 0; i < k; ++i) {
      a(i) = -bound + step * (rest % per_axis);
      rest /= per_axis;
    }
    const double obj = lasso_objective(d, e, a, lambda);
    if (obj < best_obj) {
      best_obj = obj;
      best = a;
    }
  }

  std::vector<Eigen::VectorXd> directions;
  int combos = 1;
  for (int i = 0; i < k; ++i) combos *= 3;
  for (int idx = 0; idx < combos; ++idx) {
    Eigen::VectorXd dir(k);
    int rest = idx;
    for (int i = 0; i < k; ++i) {
      dir(i) = (rest % 3) - 1.0;
      rest /= 3;
    }
    if (!dir.isZero()) directions.push_back(dir);
  }
  // Exact zeros matter for the L1 term; try snapping each coordinate.
  double h = step;
  while (h > 1e-13) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (const auto& dir : directions) {
        const Eigen::VectorXd trial = best + h * dir;
        const double obj = lasso_objective(d, e, trial, lambda);
        if (obj < best_obj) {
          best_obj = obj;
          best = trial;
          improved = true;
        }
      }
      for (int i = 0; i < k; ++i) {
        Eigen::VectorXd trial = best;
        trial(i) = 0.0;
        const double obj = lasso_objective(d, e, trial, lambda);
        if (obj < best_obj) {
          best_obj = obj;
          best = trial;
          improved = true;
        }
      }
    }
    h *= 0.5;
  }
  LassoMinimum out;
  out.coefficients = best;
  out.objective = best_obj;
  out.on_boundary = best.cwiseAbs().maxCoeff() > bound - 2.0 * step;
  return out;
}

/// Seeded Gaussian matrix from the standard library generator.
inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols,
                                       double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(gen);
  return m;
}

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline Eigen::MatrixXd random_spd(std::mt19937_64& gen, Eigen::Index n, double lo = 0.5, double hi = 3.0) {
  const Eigen::MatrixXd g = gaussian_matrix(gen, n, n);
  // Gram-Schmidt for a random orthonormal basis.
  Eigen::MatrixXd q = g;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    q.col(j) /= q.col(j).norm();
  }
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda(i) = u(gen);
  return q * lambda.asDiagonal() * q.transpose();
}

}  // namespace oracle

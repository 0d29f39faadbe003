// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "zslgmm/dataset.hpp"
#include "zslgmm/dimred.hpp"
#include "zslgmm/experiments.hpp"
#include "zslgmm/gmm_em.hpp"
#include "zslgmm/signatures.hpp"
#include "zslgmm/sparse_synth.hpp"
#include "zslgmm/synthetic.hpp"

using namespace zslgmm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

struct Outcome {
  enum Kind { Pass, Fail, Skip } kind = Fail;
  std::string detail;
};

int failures = 0;

void report(int number, const std::string& title, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {Outcome::Fail, std::string("exception: ") + e.what()};
  }
  const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Fail ? "FAIL" : "SKIP";
  if (o.kind == Outcome::Fail) ++failures;
  std::cout << tag << "  " << number << ". " << title << ": " << o.detail << std::endl;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)}; }

// Criterion 1 -----------------------------------------------------------------

Outcome em_ascent() {
  const auto start = Clock::now();
  const int dims[] = {2, 10, 50};
  const int ks[] = {2, 5, 10};
  const CovarianceMode modes[] = {CovarianceMode::Unit, CovarianceMode::Diagonal, CovarianceMode::Full};
  int configs = 0, bad = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; configs < 100; ++seed) {
    for (const int d : dims) {
      for (const int k : ks) {
        for (const auto mode : modes) {
          if (configs == 100) break;
          const auto p = fixtures::em_problem(1000 + seed * 97 + static_cast<std::uint64_t>(configs), d, k, mode);
          const FitResult r = fit(p.init, p.X, {.tol = 1e-6, .max_iters = 200, .ridge = 1e-6});
          const auto& ll = r.trace.log_likelihood;
          bool ok = true;
          for (std::size_t t = 1; t < ll.size(); ++t) {
            const double drop = ll[t - 1] - ll[t];
            worst = std::max(worst, drop);
            if (drop > 1e-9) ok = false;
          }
          if (!ok) ++bad;
          ++configs;
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  return verdict(bad == 0 && elapsed < 60.0,
                 fmt("%.0f/100 fits non-decreasing, largest drop %.3g, %.1f s", 100 - bad, worst, elapsed));
}

// Criterion 2 -----------------------------------------------------------------

Outcome lasso_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> size(1, 3);
  const double lambdas[] = {0.01, 0.1, 0.3, 1.0, 2.0};
  const LassoOptions base{.lambda = 0.0, .tol = 1e-12, .max_iters = 1000000};
  double worst_obj = 0.0, worst_ls = 0.0;
  for (int p = 0; p < 25; ++p) {
    const int dim = size(gen), atoms = size(gen);
    const Eigen::MatrixXd D = oracle::gaussian_matrix(gen, dim, atoms);
    const Eigen::VectorXd e = oracle::gaussian_matrix(gen, dim, 1);
    LassoOptions opt = base;
    opt.lambda = lambdas[p % 5];
    const SparseCode code = solve_lasso(D, e, opt);
    // The unique-minimum region can be far out when atoms are nearly parallel;
    // widen the box until the oracle's optimum is interior.
    double bound = 3.0;
    auto best = oracle::brute_force_lasso(D, e, opt.lambda, bound, atoms == 3 ? 0.05 : 0.02);
    while (best.on_boundary && bound < 200.0) {
      bound *= 4.0;
      best = oracle::brute_force_lasso(D, e, opt.lambda, bound, bound / (atoms == 3 ? 60.0 : 150.0));
    }
    worst_obj = std::max(worst_obj, std::abs(code.objective - best.objective));
  }
  for (int p = 0; p < 25; ++p) {
    const int dim = size(gen);
    std::uniform_int_distribution<int> cols(1, dim);
    const int atoms = cols(gen);
    const Eigen::MatrixXd D = oracle::gaussian_matrix(gen, dim, atoms) +
                              Eigen::MatrixXd::Identity(dim, atoms);
    const Eigen::VectorXd e = oracle::gaussian_matrix(gen, dim, 1);
    const SparseCode code = solve_lasso(D, e, base);
    worst_ls = std::max(worst_ls, (code.coefficients - oracle::least_squares(D, e)).cwiseAbs().maxCoeff());
  }
  const double elapsed = seconds_since(start);
  return verdict(worst_obj <= 1e-6 && worst_ls <= 1e-6 && elapsed < 30.0,
                 fmt("max objective gap %.3g, max least-squares gap %.3g, %.1f s", worst_obj, worst_ls, elapsed));
}

// Criteria 3 to 5 -------------------------------------------------------------

SyntheticSpec recovery_benchmark(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.classes = 50;
  spec.per_class = 200;
  spec.feature_dim = 10;
  spec.embedding_dim = 16;
  spec.separation = 6.0;
  spec.sigma = 1.0;
  spec.fidelity = EmbeddingFidelity::ExactLinear;
  spec.seed = seed;
  return spec;
}

SyntheticSpec degraded_benchmark(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.classes = 20;
  spec.per_class = 200;
  spec.feature_dim = 10;
  spec.embedding_dim = 10;
  spec.separation = 4.0;
  spec.sigma = 1.0;
  spec.fidelity = EmbeddingFidelity::Noisy;
  spec.noise = 0.2;
  spec.seed = seed;
  return spec;
}

/// One trial with 10 unseen classes per seed; the seed drives data, split, and baseline draws.
TrialResult seeded_trial(const SyntheticSpec& spec, std::span<const Method> methods) {
  const ZslDataset data = generate_synthetic(spec).dataset;
  ExperimentConfig config;
  config.covariance_mode = CovarianceMode::Unit;
  config.seed = spec.seed;
  const SplitSpec split = generate_splits(spec.classes, 10, 1, spec.seed);
  const ExperimentReport r = run_trials(data, split, config, methods);
  if (r.trials.front().failed) throw Error("seed " + std::to_string(spec.seed) + ": " + r.trials.front().error);
  return r.trials.front();
}

Outcome synthetic_recovery() {
  const auto start = Clock::now();
  const Method methods[] = {Method::Inductive, Method::Transductive};
  double ind = 0.0, trans = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const TrialResult t = seeded_trial(recovery_benchmark(seed), methods);
    ind += t.inductive->accuracy / 20.0;
    trans += t.transductive->accuracy / 20.0;
  }
  const double elapsed = seconds_since(start);
  return verdict(ind >= 0.95 && trans >= 0.99 && elapsed < 120.0,
                 fmt("inductive %.4f, transductive %.4f over 20 seeds, %.1f s", ind, trans, elapsed));
}

Outcome transductive_gain() {
  const Method methods[] = {Method::Inductive, Method::Transductive, Method::Baseline};
  double ind = 0.0, trans = 0.0;
  int ordered = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const TrialResult t = seeded_trial(degraded_benchmark(seed), methods);
    ind += t.inductive->accuracy / 50.0;
    trans += t.transductive->accuracy / 50.0;
    if (t.baseline->accuracy <= t.inductive->accuracy && t.inductive->accuracy <= t.transductive->accuracy) ++ordered;
  }
  const double gap = 100.0 * (trans - ind);
  return verdict(gap >= 3.0 && ordered >= 45,
                 fmt("gain %.2f points (inductive %.4f), ordering in %.0f%% of 50 seeds", gap, ind, 2.0 * ordered));
}

Outcome baseline_at_chance() {
  const Method methods[] = {Method::Baseline};
  double mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    mean += seeded_trial(recovery_benchmark(seed), methods).baseline->accuracy / 50.0;
  }
  return verdict(mean <= 0.30, fmt("mean baseline accuracy %.4f over 50 seeds", mean));
}

// Criterion 6 -----------------------------------------------------------------

Outcome kernel_oracles() {
  std::mt19937_64 gen(6);
  double pca_gap = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = oracle::gaussian_matrix(gen, trial % 2 == 0 ? 40 : 6, 8);
    const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
    const auto [values, vectors] = oracle::jacobi_eigen(cov);
    const Eigen::Index dim = 4;
    const PcaModel m = fit_pca(X, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const Eigen::RowVectorXd ref = vectors.col(i).transpose();
      const double same = (m.basis.row(i) - ref).cwiseAbs().maxCoeff();
      const double flip = (m.basis.row(i) + ref).cwiseAbs().maxCoeff();
      pca_gap = std::max({pca_gap, std::min(same, flip), std::abs(m.explained_variance(i) - values(i))});
    }
  }

  double density_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd cov = oracle::random_spd(gen, 3, 0.2, 5.0);
    const Eigen::VectorXd mean = oracle::gaussian_matrix(gen, 3, 1);
    const auto sig = GaussianSignature::full(mean, cov);
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd x = mean + oracle::gaussian_matrix(gen, 3, 1, 2.0);
      density_gap = std::max(density_gap, std::abs(sig.log_density(x) - oracle::normal_log_density(x, mean, cov)));
    }
  }

  const double xs[4] = {-1.0, 0.5, 2.0, 4.0};
  const Eigen::MatrixXd X = Eigen::Map<const Eigen::VectorXd>(xs, 4);
  Eigen::MatrixXd r(4, 2);
  r << 0.9, 0.1, 0.7, 0.3, 0.2, 0.8, 0.05, 0.95;
  const MixtureModel start = init_mixture({GaussianSignature::diagonal(Eigen::VectorXd::Constant(1, 0.0),
                                                                       Eigen::VectorXd::Ones(1)),
                                           GaussianSignature::diagonal(Eigen::VectorXd::Constant(1, 1.0),
                                                                       Eigen::VectorXd::Ones(1))});
  const MStep m = m_step(start, X, r, 1e-9);
  double mstep_gap = 0.0;
  for (int k = 0; k < 2; ++k) {
    double nk = 0.0, sx = 0.0, sv = 0.0;
    for (int n = 0; n < 4; ++n) {
      nk += r(n, k);
      sx += r(n, k) * xs[n];
    }
    const double mu = sx / nk;
    for (int n = 0; n < 4; ++n) sv += r(n, k) * (xs[n] - mu) * (xs[n] - mu);
    const auto& c = m.model.components[static_cast<std::size_t>(k)];
    mstep_gap = std::max({mstep_gap, std::abs(m.model.weights(k) - nk / 4.0), std::abs(c.mean()(0) - mu),
                          std::abs(c.variances()(0) - sv / nk)});
  }
  return verdict(pca_gap <= 1e-8 && density_gap <= 1e-9 && mstep_gap <= 1e-12,
                 fmt("PCA %.3g, log density %.3g, M-step %.3g", pca_gap, density_gap, mstep_gap));
}

// Criterion 7 -----------------------------------------------------------------

int run_cli_quiet(const std::vector<std::string>& args, std::string& err_text) {
  std::ostringstream out, err;
  const int status = cli::run_cli(args, out, err);
  err_text = err.str();
  return status;
}

Outcome determinism() {
  testing::TempDir dir;
  auto args = [&](const std::string& out, const std::string& workers) {
    return std::vector<std::string>{"run", "--synthetic", "classes=12", "unseen=4", "trials=40", "--methods",
                                    "inductive,transductive,baseline", "--seed", "42", "--workers", workers,
                                    "--out", (dir / out).string()};
  };
  std::string err;
  for (const auto& [out, workers] : {std::pair{"a", "1"}, {"b", "1"}, {"c", "8"}}) {
    if (run_cli_quiet(args(out, workers), err) != 0) return {Outcome::Fail, "run failed: " + err};
  }
  bool identical = true;
  for (const char* f : {"report.json", "trials.csv", "boxplot.csv"}) {
    identical = identical && testing::read_file(dir / "a" / f) == testing::read_file(dir / "b" / f);
  }
  const auto a = nlohmann::json::parse(testing::read_file(dir / "a" / "report.json"))["aggregates"];
  const auto c = nlohmann::json::parse(testing::read_file(dir / "c" / "report.json"))["aggregates"];
  double worst = a.size() == c.size() ? 0.0 : 1.0;
  for (const auto& [method, stats] : a.items()) {
    if (!c.contains(method)) {
      worst = 1.0;
      continue;
    }
    for (const auto& [key, value] : stats.items()) {
      worst = std::max(worst, std::abs(value.get<double>() - c[method][key].get<double>()));
    }
  }
  return verdict(identical && worst <= 1e-10,
                 std::string(identical ? "workers=1 reports byte-identical" : "workers=1 reports differ") +
                     fmt(", workers=8 aggregate gap %.3g", worst));
}

// Criterion 8 -----------------------------------------------------------------

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? v : nullptr;
}

std::vector<std::filesystem::path> split_paths(const std::string& list) {
  std::vector<std::filesystem::path> out;
  std::stringstream in(list);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

double mean_of(const ExperimentReport& r, Method m) { return r.aggregate(m)->mean; }

Outcome real_data_numbers() {
  const char* awa_f = env("ZSLGMM_AWA_FEATURES");
  const char* awa_l = env("ZSLGMM_AWA_LABELS");
  const char* awa_e = env("ZSLGMM_AWA_EMBEDDINGS");
  const char* cub_f = env("ZSLGMM_CUB_FEATURES");
  const char* cub_l = env("ZSLGMM_CUB_LABELS");
  const char* cub_e = env("ZSLGMM_CUB_EMBEDDINGS");
  const bool awa = awa_f && awa_l && awa_e;
  const bool cub = cub_f && cub_l && cub_e;
  if (!awa && !cub) {
    return {Outcome::Skip, "optional; set ZSLGMM_AWA_{FEATURES,LABELS,EMBEDDINGS} and/or ZSLGMM_CUB_* to run"};
  }
  bool ok = true;
  std::string detail;
  const Method methods[] = {Method::Inductive, Method::Transductive};
  if (awa) {
    const ZslDataset data = load_dataset(awa_f, awa_l, split_paths(awa_e));
    ExperimentConfig config;
    config.pca_dim = 80;
    const double ub = run_upper_bound(data, {}, config);
    config.covariance_mode = CovarianceMode::Diagonal;
    const ExperimentReport r =
        run_trials(data, generate_splits(data.class_count(), 10, 300, 1), config, methods,
                   {.workers = std::max(1u, std::thread::hardware_concurrency()), .hooks = {}});
    const double ind = mean_of(r, Method::Inductive), trans = mean_of(r, Method::Transductive);
    ok = ok && std::abs(ub - 0.8455) <= 0.010 && std::abs(ind - 0.7211) <= 0.020 && std::abs(trans - 0.8738) <= 0.020;
    detail += fmt("AwA upper bound %.4f, synthesized %.4f, EM diagonal %.4f", ub, ind, trans);
  }
  if (cub) {
    const ZslDataset data = load_dataset(cub_f, cub_l, split_paths(cub_e));
    ExperimentConfig config;
    config.pca_dim = 400;
    config.covariance_mode = CovarianceMode::Unit;
    const ExperimentReport r =
        run_trials(data, generate_splits(data.class_count(), 50, 300, 1), config, methods,
                   {.workers = std::max(1u, std::thread::hardware_concurrency()), .hooks = {}});
    const double trans = mean_of(r, Method::Transductive);
    ok = ok && std::abs(trans - 0.6337) <= 0.020;
    detail += std::string(detail.empty() ? "" : "; ") + fmt("CUB EM unit %.4f", trans);
  }
  return verdict(ok, detail);
}

}  // namespace

int main() {
  std::cout << "zslgmm acceptance suite" << std::endl;
  report(1, "EM monotone ascent", em_ascent);
  report(2, "lasso oracle equivalence", lasso_oracle);
  report(3, "synthetic recovery", synthetic_recovery);
  report(4, "transductive gain ordering", transductive_gain);
  report(5, "random-init baseline at chance", baseline_at_chance);
  report(6, "numerical-kernel oracles", kernel_oracles);
  report(7, "CLI determinism", determinism);
  report(8, "real-data reproduction", real_data_numbers);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}

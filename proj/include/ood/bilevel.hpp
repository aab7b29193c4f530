#pragma once

#include "ood/kernel.hpp"
#include "ood/oracle.hpp"
#include "ood/trace.hpp"

#include <cstdint>

namespace ood {

/// final + (initial - final)(1 + cos(pi k / horizon)) / 2, held at final past the horizon.
struct CosineSchedule {
  double initial = 1e-2;
  double final_value = 0.0;
  Index horizon = 1;

  double operator()(Index k) const;
};

/// Gradient with respect to (mean, lower-triangular cov_factor).
struct ParamGradient {
  Vector mean;
  Matrix cov_factor;

  double norm() const;
  bool finite() const { return mean.allFinite() && cov_factor.allFinite(); }
};

struct BilevelConfig {
  Index iterations = 1000;
  CosineSchedule lr{1e-2, 0.0, 1000};
  /// Schedules sigma^2 directly; the ridge term is N times this value.
  CosineSchedule nugget{1e-3, 1e-7, 1000};
  Index samples_per_step = 250;
  double lengthscale = 1.0;
  std::uint64_t seed = 0;
  bool normalize_gradient = false;
  /// Shortens any step that would move the mean by more than one standard
  /// deviation (Mahalanobis) or shrink a diagonal entry of the Cholesky factor
  /// below half its current value. With it off, the floor in project_psd is
  /// the only safeguard.
  bool trust_region = true;
  /// Err on the test split is computed every this many iterations and at the
  /// last one; other rows carry NaN.
  Index eval_every = 50;
  bool mean_only = false;

  void validate() const;
};

/// Everything produced by one sampled gradient evaluation.
struct BilevelStep {
  ParamGradient gradient;
  /// 1/2 sum_j w_j mean (y - model)^2 over the validation atoms.
  double objective = 0.0;
  double err_seen = 0.0;
  KernelModel model;
  Points training_points;
  Vector training_residuals;  // model - target at the training points
  Vector adjoint;
};

/// sum_n c_n (score_mean, score_cholesky)(u_n), points stored row-wise.
ParamGradient score_weighted_sum(const GaussianMeasure& g, const Points& u, const Vector& c);

/// Diagonal entries of L raised to kDiagFloor; off-diagonal entries untouched.
Matrix project_psd(const Matrix& cov_factor);

BilevelStep bilevel_step(const GaussianMeasure& theta, const ScalarOracle& target,
                         const LabeledEnsemble& validation, Index n, double nugget,
                         double lengthscale, RngStream& rng);

/// Score-function estimate of the outer gradient: average over N fresh
/// training draws of (model - target) * adjoint * score.
ParamGradient bilevel_gradient(const GaussianMeasure& theta, const ScalarOracle& target,
                               const LabeledEnsemble& validation, Index n, double nugget,
                               double lengthscale, RngStream& rng);

/// Projected gradient descent. Record k holds the iterate before update k;
/// the last record evaluates the final iterate.
OptimizationTrace run_bilevel(const BilevelConfig& config, const ScalarOracle& target,
                              const LabeledEnsemble& validation, const LabeledEnsemble& test,
                              const GaussianMeasure& theta0);

}  // namespace ood

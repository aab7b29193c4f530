#include "ood/bilevel.hpp"

#include "ood/benchmarks.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

namespace ood {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TraceRecord make_record(Index iter, const GaussianMeasure& theta, const BilevelStep& step) {
  TraceRecord r;
  r.iter = iter;
  r.objective = step.objective;
  r.err_seen = step.err_seen;
  r.err_unseen = kNaN;
  r.grad_norm = step.gradient.norm();
  r.mean = theta.mean();
  r.cov_factor = theta.cov_factor();
  return r;
}

}  // namespace

double CosineSchedule::operator()(Index k) const {
  if (k >= horizon) return final_value;
  const double t = static_cast<double>(k) / static_cast<double>(horizon);
  return final_value + 0.5 * (initial - final_value) * (1.0 + std::cos(std::numbers::pi * t));
}

double ParamGradient::norm() const {
  return std::sqrt(mean.squaredNorm() + cov_factor.squaredNorm());
}

void BilevelConfig::validate() const {
  require(iterations >= 0, ErrorCode::kConfig, "iterations must be >= 0");
  require(samples_per_step >= 2, ErrorCode::kConfig, "samples_per_step must be >= 2");
  require(lengthscale > 0.0, ErrorCode::kConfig, "lengthscale must be positive");
  require(lr.horizon >= 1 && nugget.horizon >= 1, ErrorCode::kConfig,
          "schedule horizon must be >= 1");
  require(lr.initial >= 0.0 && lr.final_value >= 0.0, ErrorCode::kConfig,
          "learning rates must be nonnegative");
  require(nugget.initial > 0.0 && nugget.final_value > 0.0, ErrorCode::kConfig,
          "nuggets must be positive");
  require(eval_every >= 1, ErrorCode::kConfig, "eval_every must be >= 1");
}

Matrix project_psd(const Matrix& cov_factor) {
  require(cov_factor.rows() == cov_factor.cols(), ErrorCode::kInvalidMatrix,
          "factor must be square");
  Matrix out = cov_factor;
  for (Index i = 0; i < out.rows(); ++i) out(i, i) = std::max(out(i, i), kDiagFloor);
  return out;
}

ParamGradient score_weighted_sum(const GaussianMeasure& g, const Points& u, const Vector& c) {
  require(u.cols() == g.dim() && u.rows() == c.size(), ErrorCode::kDimensionMismatch,
          "one weight per point");
  const Matrix& L = g.cov_factor();
  // Columns of r are C^{-1}(u_n - m).
  Matrix r = (u.rowwise() - g.mean().transpose()).transpose();
  L.triangularView<Eigen::Lower>().solveInPlace(r);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(r);

  ParamGradient grad;
  grad.mean = r * c;
  Matrix chol = (r * c.asDiagonal() * r.transpose()) * L;
  chol.diagonal() -= c.sum() * L.diagonal().cwiseInverse();
  grad.cov_factor = chol.triangularView<Eigen::Lower>();
  return grad;
}

BilevelStep bilevel_step(const GaussianMeasure& theta, const ScalarOracle& target,
                         const LabeledEnsemble& validation, Index n, double nugget,
                         double lengthscale, RngStream& rng) {
  require(n >= 2, ErrorCode::kInvalidArgument, "need at least two training samples");
  validation.validate();
  require(validation.dim() == theta.dim(), ErrorCode::kDimensionMismatch,
          "validation atoms and parameters");

  Points u = sample_gaussian(theta, n, rng).points();
  const Vector y = target.evaluate(u);
  KernelModel model = fit_krr(u, y, lengthscale, nugget);

  // The cross blocks feed both the validation predictions and the adjoint.
  std::vector<Matrix> grams;
  std::vector<Vector> residuals;
  std::vector<Vector> predictions;
  grams.reserve(validation.atoms.size());
  double objective = 0.0;
  for (std::size_t j = 0; j < validation.atoms.size(); ++j) {
    grams.push_back(kernel_matrix(u, validation.atoms[j].points(), lengthscale));
    predictions.push_back(grams.back().transpose() * model.coefficients());
    residuals.push_back(validation.labels[j] - predictions.back());
    objective += 0.5 * validation.weights[j] * residuals.back().squaredNorm() /
                 static_cast<double>(residuals.back().size());
  }
  const Vector lambda =
      solve_adjoint_from_blocks(model, u, grams, residuals, validation.weights, nugget);

  // model(U) = y - N sigma^2 beta for the ridge solution.
  const Vector train_res = -static_cast<double>(n) * nugget * model.coefficients();
  const Vector c = train_res.cwiseProduct(lambda) / static_cast<double>(n);

  ParamGradient grad = score_weighted_sum(theta, u, c);

  return BilevelStep{std::move(grad),
                     objective,
                     err_from_predictions(validation, predictions),
                     std::move(model),
                     std::move(u),
                     train_res,
                     lambda};
}

ParamGradient bilevel_gradient(const GaussianMeasure& theta, const ScalarOracle& target,
                               const LabeledEnsemble& validation, Index n, double nugget,
                               double lengthscale, RngStream& rng) {
  return bilevel_step(theta, target, validation, n, nugget, lengthscale, rng).gradient;
}

OptimizationTrace run_bilevel(const BilevelConfig& config, const ScalarOracle& target,
                              const LabeledEnsemble& validation, const LabeledEnsemble& test,
                              const GaussianMeasure& theta0) {
  config.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const RngStream base(config.seed, 0x62696c6576656cULL);

  OptimizationTrace trace;
  GaussianMeasure theta = theta0;
  for (Index k = 0; k <= config.iterations; ++k) {
    RngStream rng = base.split(static_cast<std::uint64_t>(k));
    std::optional<BilevelStep> attempt;
    try {
      attempt = bilevel_step(theta, target, validation, config.samples_per_step, config.nugget(k),
                           config.lengthscale, rng);
    } catch (const Error& e) {
      trace.status = "aborted: iteration " + std::to_string(k) + ": " + e.what();
      trace.final_gaussian = theta;
      return trace;
    }
    BilevelStep& step = *attempt;
    TraceRecord rec = make_record(k, theta, step);
    if (k % config.eval_every == 0 || k == config.iterations)
      rec.err_unseen = err_metric(step.model, test);
    rec.step_size = config.lr(k);
    rec.phase = "gradient";
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();

    if (!step.gradient.finite()) {
      trace.records.push_back(std::move(rec));
      trace.status = "aborted: non-finite gradient at iteration " + std::to_string(k);
      trace.final_gaussian = theta;
      return trace;
    }
    trace.records.push_back(std::move(rec));
    if (k == config.iterations) break;

    ParamGradient& g = step.gradient;
    if (config.mean_only) g.cov_factor.setZero();
    double scale = config.lr(k);
    if (config.normalize_gradient) {
      const double nrm = g.norm();
      if (nrm > 0.0) scale /= nrm;
    }
    if (config.trust_region) {
      const Matrix& L = theta.cov_factor();
      for (Index i = 0; i < L.rows(); ++i) {
        const double drop = scale * g.cov_factor(i, i);
        if (drop > 0.5 * L(i, i)) scale *= 0.5 * L(i, i) / drop;
      }
      const double shift =
          scale * L.triangularView<Eigen::Lower>().solve(g.mean).norm();
      if (shift > 1.0) scale /= shift;
    }
    Vector mean = theta.mean() - scale * g.mean;
    Matrix factor = project_psd(theta.cov_factor() - scale * g.cov_factor);
    theta = GaussianMeasure(std::move(mean), std::move(factor));
  }
  trace.final_gaussian = theta;
  return trace;
}

}  // namespace ood

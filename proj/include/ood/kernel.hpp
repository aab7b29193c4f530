#pragma once

#include "ood/measures.hpp"

#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace ood {

/// Squared-exponential kernel exp(-|x - y|^2 / l^2).
double kernel_eval(const Vector& x, const Vector& y, double lengthscale);
/// Gram block k(X_i, Y_j) for point sets stored row-wise.
Matrix kernel_matrix(const Points& x, const Points& y, double lengthscale);

/// Cholesky factor of k(U, U) + N sigma^2 I, shared between a model fit and
/// the adjoint solve that follows it.
struct KernelFactorization {
  Eigen::LLT<Matrix> llt;
  double lengthscale;
  double nugget;
};

/// Kernel ridge regressor x -> sum_n beta_n k(x, centers_n).
class KernelModel {
 public:
  KernelModel(Points centers, Vector coefficients, double lengthscale, double nugget,
              std::shared_ptr<const KernelFactorization> factorization = nullptr);

  /// Identically zero model with a single center.
  static KernelModel zero(Index dim, double lengthscale);

  Index size() const { return centers_.rows(); }
  Index dim() const { return centers_.cols(); }
  const Points& centers() const { return centers_; }
  const Vector& coefficients() const { return coefficients_; }
  double lengthscale() const { return lengthscale_; }
  double nugget() const { return nugget_; }
  const KernelFactorization* factorization() const { return factorization_.get(); }

  double operator()(const Vector& x) const;

 private:
  Points centers_;
  Vector coefficients_;
  double lengthscale_;
  double nugget_;
  std::shared_ptr<const KernelFactorization> factorization_;
};

/// Solves (k(X, X) + N sigma^2 I) beta = y by Cholesky.
KernelModel fit_krr(const Points& x, const Vector& y, double lengthscale, double nugget);

Vector predict(const KernelModel& model, const Points& x);
/// Predictions at x given the precomputed block k(x, centers).
Vector predict_from_gram(const KernelModel& model, const Matrix& cross_gram);
Vector predict_gradient(const KernelModel& model, const Vector& x);

/// Adjoint values at the training points:
/// (k(U,U) + N sigma^2 I)^{-1} N sum_j w_j / M_j k(U, V^j) (y_j - model(V^j)).
/// Reuses the model's factorization when U and sigma^2 match.
Vector solve_adjoint(const KernelModel& model, const Points& training_points,
                     const LabeledEnsemble& validation, double nugget);

/// Same solve with model residuals and cross-Gram blocks k(U, V^j) precomputed.
Vector solve_adjoint_from_blocks(const KernelModel& model, const Points& training_points,
                                 const std::vector<Matrix>& cross_grams,
                                 const std::vector<Vector>& residuals,
                                 const std::vector<double>& weights, double nugget);

using PointPair = std::pair<Vector, Vector>;
using VectorMap = std::function<Vector(const Vector&)>;

/// max |F(a) - F(b)| / |a - b| over the supplied pairs.
double lipschitz_estimate(const VectorMap& evaluator, const std::vector<PointPair>& pairs);

}  // namespace ood

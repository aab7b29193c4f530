#include "ood/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace ood {
namespace {

std::shared_ptr<const KernelFactorization> factorize(const Points& x, double lengthscale,
                                                     double nugget) {
  const auto n = static_cast<double>(x.rows());
  Matrix gram = kernel_matrix(x, x, lengthscale);
  gram.diagonal().array() += n * nugget;
  auto fact = std::make_shared<KernelFactorization>(
      KernelFactorization{Eigen::LLT<Matrix>(gram), lengthscale, nugget});
  bool ok = fact->llt.info() == Eigen::Success;
  // A positive nugget that is lost to round-off gets topped up until the
  // factorization succeeds.
  for (double jitter = 1e-12; !ok && nugget > 0.0 && jitter <= 1e-6; jitter *= 10.0) {
    gram.diagonal().array() += jitter;
    fact->llt.compute(gram);
    ok = fact->llt.info() == Eigen::Success;
  }
  if (ok && nugget == 0.0) {
    const Vector diag = Matrix(fact->llt.matrixL()).diagonal();
    // Pivots this small relative to the largest mean the system is singular
    // to working precision.
    ok = diag.allFinite() && diag.minCoeff() > 1e-7 * diag.maxCoeff();
  }
  require(ok, ErrorCode::kSingularKernelMatrix,
          "regularized kernel matrix is not numerically positive definite");
  return fact;
}

bool reusable(const KernelModel& model, const Points& u, double nugget) {
  const auto* f = model.factorization();
  return f != nullptr && f->nugget == nugget && f->lengthscale == model.lengthscale() &&
         model.centers().rows() == u.rows() && model.centers().cols() == u.cols() &&
         model.centers() == u;
}

}  // namespace

double kernel_eval(const Vector& x, const Vector& y, double lengthscale) {
  require(x.size() == y.size(), ErrorCode::kDimensionMismatch, "kernel arguments");
  require(lengthscale > 0.0, ErrorCode::kInvalidArgument, "lengthscale must be positive");
  return std::exp(-(x - y).squaredNorm() / (lengthscale * lengthscale));
}

Matrix kernel_matrix(const Points& x, const Points& y, double lengthscale) {
  require(x.cols() == y.cols(), ErrorCode::kDimensionMismatch, "kernel arguments");
  require(lengthscale > 0.0, ErrorCode::kInvalidArgument, "lengthscale must be positive");
  Matrix d = (-2.0 * x) * y.transpose();
  d.colwise() += x.rowwise().squaredNorm();
  d.rowwise() += y.rowwise().squaredNorm().transpose();
  return (-d.array().max(0.0) / (lengthscale * lengthscale)).exp().matrix();
}

KernelModel::KernelModel(Points centers, Vector coefficients, double lengthscale,
                         double nugget,
                         std::shared_ptr<const KernelFactorization> factorization)
    : centers_(std::move(centers)),
      coefficients_(std::move(coefficients)),
      lengthscale_(lengthscale),
      nugget_(nugget),
      factorization_(std::move(factorization)) {
  require(centers_.rows() >= 1, ErrorCode::kInvalidArgument, "model needs a center");
  require(coefficients_.size() == centers_.rows(), ErrorCode::kDimensionMismatch,
          "one coefficient per center");
  require(lengthscale_ > 0.0, ErrorCode::kInvalidArgument, "lengthscale must be positive");
  require(nugget_ >= 0.0, ErrorCode::kInvalidArgument, "nugget must be nonnegative");
}

KernelModel KernelModel::zero(Index dim, double lengthscale) {
  return KernelModel(Points::Zero(1, dim), Vector::Zero(1), lengthscale, 0.0);
}

double KernelModel::operator()(const Vector& x) const {
  require(x.size() == dim(), ErrorCode::kDimensionMismatch, "query dimension");
  const Vector d2 = (centers_.rowwise() - x.transpose()).rowwise().squaredNorm();
  return (-d2.array() / (lengthscale_ * lengthscale_)).exp().matrix().dot(coefficients_);
}

KernelModel fit_krr(const Points& x, const Vector& y, double lengthscale, double nugget) {
  require(x.rows() >= 1, ErrorCode::kInvalidArgument, "need at least one training point");
  require(y.size() == x.rows(), ErrorCode::kDimensionMismatch, "one label per point");
  require(nugget >= 0.0, ErrorCode::kInvalidArgument, "nugget must be nonnegative");
  require(y.allFinite(), ErrorCode::kNonFinite, "labels must be finite");
  auto fact = factorize(x, lengthscale, nugget);
  Vector beta = fact->llt.solve(y);
  return KernelModel(x, std::move(beta), lengthscale, nugget, std::move(fact));
}

Vector predict(const KernelModel& model, const Points& x) {
  require(x.cols() == model.dim(), ErrorCode::kDimensionMismatch, "query dimension");
  // Blocked to bound the size of the temporary Gram block.
  constexpr Index kBlock = 4096;
  Vector out(x.rows());
  for (Index start = 0; start < x.rows(); start += kBlock) {
    const Index len = std::min(kBlock, x.rows() - start);
    out.segment(start, len) =
        kernel_matrix(x.middleRows(start, len), model.centers(), model.lengthscale()) *
        model.coefficients();
  }
  return out;
}

Vector predict_from_gram(const KernelModel& model, const Matrix& cross_gram) {
  require(cross_gram.cols() == model.size(), ErrorCode::kDimensionMismatch, "gram block");
  return cross_gram * model.coefficients();
}

Vector predict_gradient(const KernelModel& model, const Vector& x) {
  require(x.size() == model.dim(), ErrorCode::kDimensionMismatch, "query dimension");
  const double l2 = model.lengthscale() * model.lengthscale();
  Vector grad = Vector::Zero(model.dim());
  for (Index n = 0; n < model.size(); ++n) {
    const Vector diff = x - model.centers().row(n).transpose();
    const double k = std::exp(-diff.squaredNorm() / l2);
    grad += model.coefficients()(n) * k * (-2.0 / l2) * diff;
  }
  return grad;
}

Vector solve_adjoint_from_blocks(const KernelModel& model, const Points& training_points,
                                 const std::vector<Matrix>& cross_grams,
                                 const std::vector<Vector>& residuals,
                                 const std::vector<double>& weights, double nugget) {
  require(cross_grams.size() == residuals.size() && residuals.size() == weights.size(),
          ErrorCode::kInvalidArgument, "one block per atom");
  const Index n = training_points.rows();
  Vector rhs = Vector::Zero(n);
  for (std::size_t j = 0; j < cross_grams.size(); ++j) {
    require(cross_grams[j].rows() == n && cross_grams[j].cols() == residuals[j].size(),
            ErrorCode::kDimensionMismatch, "gram block shape");
    const auto m = static_cast<double>(residuals[j].size());
    rhs += (weights[j] / m) * (cross_grams[j] * residuals[j]);
  }
  rhs *= static_cast<double>(n);
  if (reusable(model, training_points, nugget)) return model.factorization()->llt.solve(rhs);
  return factorize(training_points, model.lengthscale(), nugget)->llt.solve(rhs);
}

Vector solve_adjoint(const KernelModel& model, const Points& training_points,
                     const LabeledEnsemble& validation, double nugget) {
  validation.validate();
  require(validation.dim() == training_points.cols() && model.dim() == training_points.cols(),
          ErrorCode::kDimensionMismatch, "atoms and training points must share dimension");
  std::vector<Matrix> grams;
  std::vector<Vector> residuals;
  for (std::size_t j = 0; j < validation.atoms.size(); ++j) {
    const Points& v = validation.atoms[j].points();
    grams.push_back(kernel_matrix(training_points, v, model.lengthscale()));
    residuals.push_back(validation.labels[j] - predict(model, v));
  }
  return solve_adjoint_from_blocks(model, training_points, grams, residuals,
                                   validation.weights, nugget);
}

double lipschitz_estimate(const VectorMap& evaluator, const std::vector<PointPair>& pairs) {
  require(!pairs.empty(), ErrorCode::kInvalidArgument, "need at least one pair");
  double best = 0.0;
  for (const auto& [a, b] : pairs) {
    const double dist = (a - b).norm();
    require(dist > 0.0, ErrorCode::kDegeneratePair, "pair has identical inputs");
    best = std::max(best, (evaluator(a) - evaluator(b)).norm() / dist);
  }
  return best;
}

}  // namespace ood

#include "ood/transport.hpp"

#include "ood/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ood {
namespace {

void require_symmetric(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorCode::kInvalidMatrix, "matrix must be square");
  require(m.allFinite(), ErrorCode::kNonFinite, "matrix must be finite");
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, ErrorCode::kInvalidMatrix,
          "matrix must be symmetric");
}

void require_same_dim(Index a, Index b) {
  require(a == b, ErrorCode::kDimensionMismatch, "measures must share dimension");
}

Matrix squared_distances(const Points& a, const Points& b) {
  Matrix d = (-2.0 * a) * b.transpose();
  d.colwise() += a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

// Both sides sorted: monotone matching is optimal for convex costs on the line.
EmpiricalTransport w2_sorted_1d(const Points& a, const Points& b) {
  const Index n = a.rows();
  std::vector<Index> ia(static_cast<std::size_t>(n)), ib(static_cast<std::size_t>(n));
  std::iota(ia.begin(), ia.end(), Index{0});
  std::iota(ib.begin(), ib.end(), Index{0});
  std::stable_sort(ia.begin(), ia.end(), [&](Index x, Index y) { return a(x, 0) < a(y, 0); });
  std::stable_sort(ib.begin(), ib.end(), [&](Index x, Index y) { return b(x, 0) < b(y, 0); });
  EmpiricalTransport plan;
  plan.matching.assign(static_cast<std::size_t>(n), 0);
  double total = 0.0;
  for (std::size_t k = 0; k < ia.size(); ++k) {
    plan.matching[static_cast<std::size_t>(ia[k])] = ib[k];
    const double diff = a(ia[k], 0) - b(ib[k], 0);
    total += diff * diff;
  }
  plan.w2_squared = total / static_cast<double>(n);
  plan.w2 = std::sqrt(plan.w2_squared);
  return plan;
}

}  // namespace

Matrix psd_sqrt(const Matrix& m) {
  require_symmetric(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Matrix r = eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

Matrix psd_inv_sqrt(const Matrix& m) {
  require_symmetric(m);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  require(eig.eigenvalues().minCoeff() > 0.0, ErrorCode::kInvalidMatrix,
          "inverse square root needs a positive definite matrix");
  const Vector inv_roots = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  Matrix r = eig.eigenvectors() * inv_roots.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

double w2_gaussian_squared(const GaussianMeasure& a, const GaussianMeasure& b) {
  require_same_dim(a.dim(), b.dim());
  const Matrix ca = a.covariance();
  const Matrix cb = b.covariance();
  const Matrix ra = psd_sqrt(ca);
  Matrix cross = ra * cb * ra;
  cross = 0.5 * (cross + cross.transpose());
  const double bures = ca.trace() + cb.trace() - 2.0 * psd_sqrt(cross).trace();
  return (a.mean() - b.mean()).squaredNorm() + std::max(bures, 0.0);
}

double w2_gaussian(const GaussianMeasure& a, const GaussianMeasure& b) {
  return std::sqrt(w2_gaussian_squared(a, b));
}

Matrix gaussian_ot_linear(const GaussianMeasure& a, const GaussianMeasure& b) {
  require_same_dim(a.dim(), b.dim());
  const Matrix ca = a.covariance();
  const Matrix ra = psd_sqrt(ca);
  const Matrix ra_inv = psd_inv_sqrt(ca);
  Matrix cross = ra * b.covariance() * ra;
  cross = 0.5 * (cross + cross.transpose());
  Matrix lin = ra_inv * psd_sqrt(cross) * ra_inv;
  return 0.5 * (lin + lin.transpose());
}

AffineMap gaussian_ot_map(const GaussianMeasure& a, const GaussianMeasure& b) {
  return AffineMap{b.mean(), gaussian_ot_linear(a, b), a.mean()};
}

double kantorovich_potential(const GaussianMeasure& a, const GaussianMeasure& b,
                             const Vector& u) {
  require_same_dim(a.dim(), b.dim());
  require_same_dim(a.dim(), u.size());
  const Matrix lin = gaussian_ot_linear(a, b);
  return 0.5 * u.squaredNorm() - 0.5 * u.dot(lin * u) - u.dot(b.mean() - lin * a.mean());
}

EmpiricalTransport w2_empirical_plan(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require_same_dim(a.dim(), b.dim());
  require(a.size() == b.size(), ErrorCode::kUnsupportedConfiguration,
          "empirical W2 needs equal particle counts");
  if (a.dim() == 1) return w2_sorted_1d(a.points(), b.points());
  const Assignment match = solve_assignment(squared_distances(a.points(), b.points()));
  EmpiricalTransport plan;
  plan.matching = match.row_to_col;
  // Recompute the cost exactly from the points rather than the expanded form.
  double total = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    total += (a.points().row(i) - b.points().row(plan.matching[static_cast<std::size_t>(i)]))
                 .squaredNorm();
  plan.w2_squared = total / static_cast<double>(a.size());
  plan.w2 = std::sqrt(plan.w2_squared);
  return plan;
}

double w2_empirical(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  return w2_empirical_plan(a, b).w2;
}

double barycenter_residual(const MetaTestEnsemble& q, const Matrix& covariance) {
  const Matrix root = psd_sqrt(covariance);
  Matrix avg = Matrix::Zero(covariance.rows(), covariance.cols());
  for (Index k = 0; k < q.size(); ++k) {
    Matrix inner = root * q.gaussian(k).covariance() * root;
    avg += q.weight(k) * psd_sqrt(0.5 * (inner + inner.transpose()));
  }
  return (covariance - avg).norm();
}

BarycenterResult gaussian_barycenter_solve(const MetaTestEnsemble& q,
                                           const BarycenterOptions& options) {
  require(options.tol > 0.0, ErrorCode::kInvalidArgument, "tolerance must be positive");
  const Index d = q.dim();
  Vector mean = Vector::Zero(d);
  Matrix cov = Matrix::Zero(d, d);
  std::vector<Matrix> covs;
  covs.reserve(static_cast<std::size_t>(q.size()));
  for (Index k = 0; k < q.size(); ++k) {
    const auto& g = q.gaussian(k);
    covs.push_back(g.covariance());
    mean += q.weight(k) * g.mean();
    cov += q.weight(k) * covs.back();
  }

  double damping = 1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= options.max_iter; ++it) {
    const Matrix root = psd_sqrt(cov);
    Matrix avg = Matrix::Zero(d, d);
    for (std::size_t k = 0; k < covs.size(); ++k) {
      Matrix inner = root * covs[k] * root;
      avg += q.weights()[k] * psd_sqrt(0.5 * (inner + inner.transpose()));
    }
    const double residual = (cov - avg).norm();
    if (residual < options.tol)
      return {GaussianMeasure::from_covariance(mean, cov), residual, it};
    if (it == options.max_iter)
      throw BarycenterNoConvergence(GaussianMeasure::from_covariance(mean, cov), residual);
    if (residual > previous) damping = 0.5;
    previous = residual;
    const Matrix root_inv = psd_inv_sqrt(cov);
    Matrix next = root_inv * avg * avg * root_inv;
    next = 0.5 * (next + next.transpose());
    cov = damping * next + (1.0 - damping) * cov;
  }
  throw BarycenterNoConvergence(GaussianMeasure::from_covariance(mean, cov), previous);
}

GaussianMeasure gaussian_barycenter(const MetaTestEnsemble& q, double tol, int max_iter) {
  return gaussian_barycenter_solve(q, {tol, max_iter}).barycenter;
}

namespace {

double atom_w2_squared(const Atom& a, const Atom& b, RngStream& rng) {
  const auto* ga = std::get_if<GaussianMeasure>(&a);
  const auto* gb = std::get_if<GaussianMeasure>(&b);
  if (ga && gb) return w2_gaussian_squared(*ga, *gb);
  const auto* ea = std::get_if<EmpiricalMeasure>(&a);
  const auto* eb = std::get_if<EmpiricalMeasure>(&b);
  if (ea && eb) return w2_empirical_plan(*ea, *eb).w2_squared;
  // Mixed pair: sample the Gaussian side to the size of the empirical side.
  const EmpiricalMeasure& e = ea ? *ea : *eb;
  const GaussianMeasure& g = ga ? *ga : *gb;
  return w2_empirical_plan(e, sample_gaussian(g, e.size(), rng)).w2_squared;
}

Points sample_mixture(const MetaTestEnsemble& q, Index n, RngStream& rng) {
  Points out(n, q.dim());
  std::vector<double> cdf(q.weights().size());
  std::partial_sum(q.weights().begin(), q.weights().end(), cdf.begin());
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform() * cdf.back();
    const auto k = static_cast<Index>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    out.row(i) = sample_atom(q.atom(std::min(k, q.size() - 1)), 1, rng).row(0);
  }
  return out;
}

}  // namespace

MixtureStability mixture_w2_stability_check(const MetaTestEnsemble& q1,
                                            const MetaTestEnsemble& q2, Index n,
                                            RngStream& rng) {
  require(q1.size() == q2.size(), ErrorCode::kUnsupportedConfiguration,
          "ensembles need equal atom counts");
  require_same_dim(q1.dim(), q2.dim());
  require(n >= 1, ErrorCode::kInvalidArgument, "sample count must be >= 1");
  const Index k = q1.size();
  for (Index i = 0; i < k; ++i)
    require(std::abs(q1.weight(i) - 1.0 / static_cast<double>(k)) < 1e-12 &&
                std::abs(q2.weight(i) - 1.0 / static_cast<double>(k)) < 1e-12,
            ErrorCode::kUnsupportedConfiguration, "stability check needs uniform weights");

  RngStream atom_rng = rng.split(1);
  Matrix cost(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) cost(i, j) = atom_w2_squared(q1.atom(i), q2.atom(j), atom_rng);
  const Assignment match = solve_assignment(cost);
  const double rhs = std::sqrt(std::max(match.total_cost, 0.0) / static_cast<double>(k));

  RngStream s1 = rng.split(2);
  RngStream s2 = rng.split(3);
  const EmpiricalMeasure x(sample_mixture(q1, n, s1));
  const EmpiricalMeasure y(sample_mixture(q2, n, s2));
  return {w2_empirical(x, y), rhs};
}

}  // namespace ood

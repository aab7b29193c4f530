#include "ood/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ood {

GaussianMeasure::GaussianMeasure(Vector mean, Matrix cov_factor)
    : mean_(std::move(mean)), cov_factor_(std::move(cov_factor)) {
  require(mean_.size() >= 1, ErrorCode::kInvalidArgument, "Gaussian dimension must be >= 1");
  require(cov_factor_.rows() == mean_.size() && cov_factor_.cols() == mean_.size(),
          ErrorCode::kDimensionMismatch, "covariance factor must be d x d");
  require(mean_.allFinite() && cov_factor_.allFinite(), ErrorCode::kNonFinite,
          "Gaussian parameters must be finite");
  for (Index i = 0; i < dim(); ++i) {
    require(cov_factor_(i, i) >= kDiagFloor, ErrorCode::kInvalidMatrix,
            "covariance factor diagonal below floor");
    for (Index j = i + 1; j < dim(); ++j)
      require(cov_factor_(i, j) == 0.0, ErrorCode::kInvalidMatrix,
              "covariance factor must be lower triangular");
  }
}

GaussianMeasure GaussianMeasure::from_covariance(Vector mean, const Matrix& covariance) {
  require(covariance.rows() == covariance.cols(), ErrorCode::kInvalidMatrix,
          "covariance must be square");
  Eigen::LLT<Matrix> llt(0.5 * (covariance + covariance.transpose()));
  require(llt.info() == Eigen::Success, ErrorCode::kInvalidMatrix,
          "covariance is not positive definite");
  Matrix factor = llt.matrixL();
  for (Index i = 0; i < factor.rows(); ++i)
    factor(i, i) = std::max(factor(i, i), kDiagFloor);
  return GaussianMeasure(std::move(mean), std::move(factor));
}

GaussianMeasure GaussianMeasure::standard(Index dim) {
  return GaussianMeasure(Vector::Zero(dim), Matrix::Identity(dim, dim));
}

Vector GaussianMeasure::solve_covariance(const Vector& v) const {
  const auto lower = cov_factor_.triangularView<Eigen::Lower>();
  Vector y = lower.solve(v);
  return lower.transpose().solve(y);
}

double GaussianMeasure::log_density(const Vector& u) const {
  require(u.size() == dim(), ErrorCode::kDimensionMismatch, "point dimension");
  const Vector z = cov_factor_.triangularView<Eigen::Lower>().solve(u - mean_);
  const double log_det_half = cov_factor_.diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - log_det_half -
         0.5 * static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi);
}

EmpiricalMeasure::EmpiricalMeasure(Points points) : points_(std::move(points)) {
  require(points_.rows() >= 1 && points_.cols() >= 1, ErrorCode::kInvalidArgument,
          "empirical measure needs at least one point of dimension >= 1");
}

Vector EmpiricalMeasure::mean() const { return points_.colwise().mean().transpose(); }

Matrix EmpiricalMeasure::covariance() const {
  const Matrix centered = points_.rowwise() - points_.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(size());
}

Index dim_of(const Atom& atom) {
  return std::visit([](const auto& m) { return m.dim(); }, atom);
}

MetaTestEnsemble::MetaTestEnsemble(std::vector<Atom> atoms)
    : MetaTestEnsemble(std::move(atoms), {}) {}

MetaTestEnsemble::MetaTestEnsemble(std::vector<Atom> atoms, std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  require(!atoms_.empty(), ErrorCode::kInvalidArgument, "ensemble needs at least one atom");
  if (weights_.empty())
    weights_.assign(atoms_.size(), 1.0 / static_cast<double>(atoms_.size()));
  require(weights_.size() == atoms_.size(), ErrorCode::kInvalidArgument,
          "one weight per atom");
  double total = 0.0;
  for (double w : weights_) {
    require(w >= 0.0, ErrorCode::kInvalidArgument, "weights must be nonnegative");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-12, ErrorCode::kInvalidArgument,
          "weights must sum to 1");
  const Index d = dim_of(atoms_.front());
  for (const auto& a : atoms_)
    require(dim_of(a) == d, ErrorCode::kDimensionMismatch, "atoms must share dimension");
}

bool MetaTestEnsemble::all_gaussian() const {
  return std::all_of(atoms_.begin(), atoms_.end(), [](const Atom& a) {
    return std::holds_alternative<GaussianMeasure>(a);
  });
}

bool MetaTestEnsemble::all_empirical() const {
  return std::all_of(atoms_.begin(), atoms_.end(), [](const Atom& a) {
    return std::holds_alternative<EmpiricalMeasure>(a);
  });
}

const GaussianMeasure& MetaTestEnsemble::gaussian(Index k) const {
  const auto* g = std::get_if<GaussianMeasure>(&atom(k));
  require(g != nullptr, ErrorCode::kUnsupportedConfiguration, "atom is not Gaussian");
  return *g;
}

const EmpiricalMeasure& MetaTestEnsemble::empirical(Index k) const {
  const auto* e = std::get_if<EmpiricalMeasure>(&atom(k));
  require(e != nullptr, ErrorCode::kUnsupportedConfiguration, "atom is not empirical");
  return *e;
}

Index LabeledEnsemble::total_points() const {
  Index n = 0;
  for (const auto& a : atoms) n += a.size();
  return n;
}

void LabeledEnsemble::validate() const {
  require(!atoms.empty(), ErrorCode::kInvalidArgument, "labeled ensemble is empty");
  require(labels.size() == atoms.size() && weights.size() == atoms.size(),
          ErrorCode::kInvalidArgument, "labels and weights must match atoms");
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    require(labels[k].size() == atoms[k].size(), ErrorCode::kDimensionMismatch,
            "one label per atom point");
    require(atoms[k].dim() == atoms.front().dim(), ErrorCode::kDimensionMismatch,
            "atoms must share dimension");
  }
}

EmpiricalMeasure sample_gaussian(const GaussianMeasure& g, Index n, RngStream& rng) {
  require(n >= 1, ErrorCode::kInvalidArgument, "sample count must be >= 1");
  const Matrix z = rng.normal_matrix(n, g.dim());
  Points u = z * g.cov_factor().transpose();
  u.rowwise() += g.mean().transpose();
  return EmpiricalMeasure(std::move(u));
}

Points sample_atom(const Atom& atom, Index n, RngStream& rng) {
  if (const auto* g = std::get_if<GaussianMeasure>(&atom))
    return sample_gaussian(*g, n, rng).points();
  const auto& e = std::get<EmpiricalMeasure>(atom);
  Points out(n, e.dim());
  for (Index i = 0; i < n; ++i)
    out.row(i) = e.points().row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(e.size()))));
  return out;
}

double second_moment(const GaussianMeasure& g) {
  return g.mean().squaredNorm() + g.cov_factor().squaredNorm();
}

double second_moment(const EmpiricalMeasure& e) {
  return e.points().rowwise().squaredNorm().mean();
}

double second_moment(const Atom& atom) {
  return std::visit([](const auto& m) { return second_moment(m); }, atom);
}

Vector score_mean(const GaussianMeasure& g, const Vector& u) {
  require(u.size() == g.dim(), ErrorCode::kDimensionMismatch, "point dimension");
  return g.solve_covariance(u - g.mean());
}

Matrix score_cholesky(const GaussianMeasure& g, const Vector& u) {
  require(u.size() == g.dim(), ErrorCode::kDimensionMismatch, "point dimension");
  const Matrix& L = g.cov_factor();
  const Vector r = g.solve_covariance(u - g.mean());
  // d/dL [-0.5 r^T C r - log det L] = r r^T L - L^{-T}; the lower part of
  // L^{-T} is diag(1 / L_ii).
  Matrix grad = r * (r.transpose() * L);
  grad.diagonal() -= L.diagonal().cwiseInverse();
  return grad.triangularView<Eigen::Lower>();
}

Matrix sample_wishart(Index d, Index dof, RngStream& rng) {
  require(d >= 1, ErrorCode::kInvalidArgument, "dimension must be >= 1");
  require(dof >= d, ErrorCode::kInvalidDegreesOfFreedom, "Wishart needs dof >= d");
  Matrix a = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    // chi^2 with (dof - i) degrees of freedom as a sum of squared normals.
    double chi2 = 0.0;
    for (Index k = 0; k < dof - i; ++k) {
      const double z = rng.normal();
      chi2 += z * z;
    }
    a(i, i) = std::sqrt(chi2);
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  Matrix w = a * a.transpose();
  return 0.5 * (w + w.transpose());
}

}  // namespace ood

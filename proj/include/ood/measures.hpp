#pragma once

#include "ood/rng.hpp"
#include "ood/types.hpp"

#include <variant>
#include <vector>

namespace ood {

inline constexpr double kDiagFloor = 1e-7;

/// N(mean, L L^T) with L lower triangular and diag(L) >= kDiagFloor.
class GaussianMeasure {
 public:
  GaussianMeasure(Vector mean, Matrix cov_factor);

  /// Cholesky-factors a symmetric positive definite covariance. Diagonal
  /// entries of the factor below kDiagFloor are raised to it.
  static GaussianMeasure from_covariance(Vector mean, const Matrix& covariance);
  static GaussianMeasure standard(Index dim);

  Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov_factor() const { return cov_factor_; }
  Matrix covariance() const { return cov_factor_ * cov_factor_.transpose(); }

  /// Solves C x = v with two triangular solves against the factor.
  Vector solve_covariance(const Vector& v) const;
  double log_density(const Vector& u) const;

 private:
  Vector mean_;
  Matrix cov_factor_;
};

/// Equal-weight particle set, one point per row.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(Points points);

  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  const Points& points() const { return points_; }
  auto point(Index i) const { return points_.row(i).transpose(); }

  Vector mean() const;
  Matrix covariance() const;  // 1/N normalization

 private:
  Points points_;
};

using Atom = std::variant<GaussianMeasure, EmpiricalMeasure>;

Index dim_of(const Atom& atom);

/// Finite weighted collection of test distributions.
class MetaTestEnsemble {
 public:
  explicit MetaTestEnsemble(std::vector<Atom> atoms);
  MetaTestEnsemble(std::vector<Atom> atoms, std::vector<double> weights);

  Index size() const { return static_cast<Index>(atoms_.size()); }
  Index dim() const { return dim_of(atoms_.front()); }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const Atom& atom(Index k) const { return atoms_[static_cast<std::size_t>(k)]; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(Index k) const { return weights_[static_cast<std::size_t>(k)]; }

  bool all_gaussian() const;
  bool all_empirical() const;
  /// Throws unsupported-configuration when an atom has the other type.
  const GaussianMeasure& gaussian(Index k) const;
  const EmpiricalMeasure& empirical(Index k) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<double> weights_;
};

/// Empirical atoms with target values attached to every point.
struct LabeledEnsemble {
  std::vector<EmpiricalMeasure> atoms;
  std::vector<Vector> labels;
  std::vector<double> weights;

  Index size() const { return static_cast<Index>(atoms.size()); }
  Index dim() const { return atoms.front().dim(); }
  Index total_points() const;
  void validate() const;
};

EmpiricalMeasure sample_gaussian(const GaussianMeasure& g, Index n, RngStream& rng);
/// Draws from an atom: Gaussian atoms are sampled, empirical atoms are
/// resampled uniformly with replacement.
Points sample_atom(const Atom& atom, Index n, RngStream& rng);

double second_moment(const GaussianMeasure& g);
double second_moment(const EmpiricalMeasure& e);
double second_moment(const Atom& atom);

/// Gradient of log p in the mean: C^{-1}(u - m).
Vector score_mean(const GaussianMeasure& g, const Vector& u);
/// Gradient of log p in the lower-triangular entries of the Cholesky factor.
Matrix score_cholesky(const GaussianMeasure& g, const Vector& u);

/// One Wishart(I_d, dof) draw via the Bartlett decomposition.
Matrix sample_wishart(Index d, Index dof, RngStream& rng);

}  // namespace ood

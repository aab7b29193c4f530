#pragma once

// Helpers shared by the test binaries. Oracles here are written against plain
// Eigen and the textbook formulas, not the library's internals.

#include "ood/kernel.hpp"
#include "ood/measures.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace ood::testing {

inline Matrix random_spd(Index d, RngStream& rng, double ridge = 0.3) {
  const Matrix b = rng.normal_matrix(d, d);
  return b * b.transpose() + ridge * Matrix::Identity(d, d);
}

inline GaussianMeasure random_gaussian(Index d, RngStream& rng) {
  return GaussianMeasure::from_covariance(rng.normal_vector(d), random_spd(d, rng));
}

// log N(u; m, L L^T) through a dense inverse and determinant.
inline double log_density_oracle(const Vector& m, const Matrix& L, const Vector& u) {
  const Matrix c = L * L.transpose();
  const Vector r = u - m;
  const double quad = r.dot(c.inverse() * r);
  return -0.5 * quad - 0.5 * std::log(c.determinant()) -
         0.5 * static_cast<double>(m.size()) * std::log(2.0 * std::numbers::pi);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, std::max(a.norm(), b.norm()));
}

// Central differences of a scalar function of a vector.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h = 1e-5) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double cosine(const Vector& a, const Vector& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

// Symmetric square root through an independent eigen solve.
inline Matrix sqrtm(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

inline double w2_squared_oracle(const GaussianMeasure& a, const GaussianMeasure& b) {
  const Matrix ca = a.covariance(), cb = b.covariance();
  const Matrix ra = sqrtm(ca);
  return (a.mean() - b.mean()).squaredNorm() + (ca + cb - 2.0 * sqrtm(ra * cb * ra)).trace();
}

// |C - sum_k w_k (C^{1/2} C_k C^{1/2})^{1/2}|_F with uniform weights.
inline double fixed_point_residual(const std::vector<GaussianMeasure>& atoms, const Matrix& c) {
  const Matrix r = sqrtm(c);
  Matrix avg = Matrix::Zero(c.rows(), c.cols());
  for (const auto& g : atoms)
    avg += sqrtm(r * g.covariance() * r) / static_cast<double>(atoms.size());
  return (c - avg).norm();
}

inline Matrix gram_oracle(const Points& x, const Points& y, double l) {
  Matrix k(x.rows(), y.rows());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < y.rows(); ++j)
      k(i, j) = std::exp(-(x.row(i) - y.row(j)).squaredNorm() / (l * l));
  return k;
}

inline Matrix regularized_gram(const Points& x, double l, double nugget) {
  return gram_oracle(x, x, l) +
         static_cast<double>(x.rows()) * nugget * Matrix::Identity(x.rows(), x.rows());
}

// Adjoint through a dense inverse, accumulating the right-hand side point by point.
inline Vector adjoint_oracle(const KernelModel& m, const Points& u, const LabeledEnsemble& v,
                             double nugget) {
  const double l = m.lengthscale();
  const Index n = u.rows();
  Vector rhs = Vector::Zero(n);
  for (Index j = 0; j < v.size(); ++j) {
    const auto& pts = v.atoms[static_cast<std::size_t>(j)].points();
    const Vector& lab = v.labels[static_cast<std::size_t>(j)];
    for (Index i = 0; i < pts.rows(); ++i) {
      const Vector p = pts.row(i).transpose();
      const double resid = lab(i) - (gram_oracle(p.transpose(), u, l) * m.coefficients())(0);
      rhs += v.weights[static_cast<std::size_t>(j)] / static_cast<double>(pts.rows()) * resid *
             gram_oracle(u, p.transpose(), l).col(0);
    }
  }
  return regularized_gram(u, l, nugget).inverse() * (static_cast<double>(n) * rhs);
}

// Maxmin selection recomputing every distance to the selected set from scratch.
inline std::vector<Index> naive_maxmin(const Points& f, Index k, std::vector<Index> selected) {
  while (static_cast<Index>(selected.size()) < k) {
    Index best = -1;
    double best_d = -1.0;
    for (Index i = 0; i < f.rows(); ++i) {
      if (std::find(selected.begin(), selected.end(), i) != selected.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (Index s : selected) d = std::min(d, (f.row(i) - f.row(s)).norm());
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    selected.push_back(best);
  }
  return selected;
}

// Validation misfit of the ridge model trained on y = f(u) at u = m + L z, z held fixed.
inline double crn_objective(const Vector& mean, const Matrix& factor, const Points& z,
                            const std::function<double(const Vector&)>& f,
                            const LabeledEnsemble& v, double nugget, double l) {
  const Points u = (z * factor.transpose()).rowwise() + mean.transpose();
  Vector y(u.rows());
  for (Index i = 0; i < u.rows(); ++i) y(i) = f(u.row(i).transpose());
  const KernelModel model = fit_krr(u, y, l, nugget);
  double s = 0.0;
  for (Index j = 0; j < v.size(); ++j) {
    const auto& atom = v.atoms[static_cast<std::size_t>(j)];
    const Vector r = v.labels[static_cast<std::size_t>(j)] - predict(model, atom.points());
    s += 0.5 * v.weights[static_cast<std::size_t>(j)] * r.squaredNorm() /
         static_cast<double>(atom.size());
  }
  return s;
}

}  // namespace ood::testing

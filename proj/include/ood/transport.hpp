#pragma once

#include "ood/measures.hpp"

#include <vector>

namespace ood {

/// u -> offset + linear (u - base). For a Gaussian OT map, base is the source mean.
struct AffineMap {
  Vector offset;
  Matrix linear;
  Vector base;

  Vector operator()(const Vector& u) const { return offset + linear * (u - base); }
};

/// Symmetric PSD square root with eigenvalues clamped at zero.
Matrix psd_sqrt(const Matrix& m);
/// Inverse square root of a symmetric positive definite matrix.
Matrix psd_inv_sqrt(const Matrix& m);

double w2_gaussian_squared(const GaussianMeasure& a, const GaussianMeasure& b);
double w2_gaussian(const GaussianMeasure& a, const GaussianMeasure& b);

/// Linear part A of the Gaussian OT map from a to b.
Matrix gaussian_ot_linear(const GaussianMeasure& a, const GaussianMeasure& b);
AffineMap gaussian_ot_map(const GaussianMeasure& a, const GaussianMeasure& b);

/// phi(u) = |u|^2/2 - <u, A u>/2 - <u, m_b - A m_a>, so grad phi = id - T.
double kantorovich_potential(const GaussianMeasure& a, const GaussianMeasure& b,
                             const Vector& u);

struct EmpiricalTransport {
  double w2 = 0.0;
  double w2_squared = 0.0;
  /// Point i of the source is sent to point matching[i] of the target.
  std::vector<Index> matching;
};

/// Exact W2 between equal-size uniform point clouds.
EmpiricalTransport w2_empirical_plan(const EmpiricalMeasure& a, const EmpiricalMeasure& b);
double w2_empirical(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

struct BarycenterOptions {
  double tol = 1e-10;
  int max_iter = 500;
};

struct BarycenterResult {
  GaussianMeasure barycenter;
  double residual;
  int iterations;
};

/// Thrown when the covariance fixed point does not converge; keeps the last iterate.
class BarycenterNoConvergence : public Error {
 public:
  BarycenterNoConvergence(GaussianMeasure last, double residual)
      : Error(ErrorCode::kNoConvergence, "barycenter fixed point did not converge"),
        last_iterate(std::move(last)),
        residual(residual) {}

  GaussianMeasure last_iterate;
  double residual;
};

/// Residual of C = sum_k w_k (C^{1/2} C_k C^{1/2})^{1/2} in Frobenius norm.
double barycenter_residual(const MetaTestEnsemble& q, const Matrix& covariance);

BarycenterResult gaussian_barycenter_solve(const MetaTestEnsemble& q,
                                           const BarycenterOptions& options = {});
GaussianMeasure gaussian_barycenter(const MetaTestEnsemble& q, double tol = 1e-10,
                                    int max_iter = 500);

struct MixtureStability {
  double lhs;  // W2 between samples of the two mixtures
  double rhs;  // W2 between the ensembles (atom matching)
};

/// Compares W2 of the mixtures against the ensemble-level W2 bound. Requires
/// equal atom counts and uniform weights.
MixtureStability mixture_w2_stability_check(const MetaTestEnsemble& q1,
                                            const MetaTestEnsemble& q2, Index n,
                                            RngStream& rng);

}  // namespace ood

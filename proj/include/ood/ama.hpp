#pragma once

#include "ood/benchmarks.hpp"
#include "ood/bilevel.hpp"
#include "ood/kernel.hpp"
#include "ood/oracle.hpp"
#include "ood/trace.hpp"
#include "ood/transport.hpp"

#include <cstdint>
#include <optional>
#include <variant>

namespace ood {

/// Inputs of the distribution-shift factor c.
struct BoundFactors {
  double lip_target = 0.0;     // Lip(G*)
  double lip_model_cap = 0.0;  // R
  double offset_target = 0.0;  // |G*(0)|
  double offset_model = 0.0;   // |model(0)|
  double moment = 0.0;         // m2(nu)
  double moment_atom = 0.0;    // m2(nu')
};

/// L sqrt(4 L^2 (m2 + m2') + 16 (|G*(0)|^2 + |model(0)|^2)) with L = Lip(G*) + R.
double c_factor(const BoundFactors& b);

enum class ObjectiveForm {
  kBound,      // sqrt(E c_R^2) from the bound factors
  kSurrogate,  // sqrt(1 + m2(nu))
};

/// sqrt(a + b m2(nu)) is the factor multiplying sqrt(E W2^2).
struct MomentWeight {
  double a = 1.0;
  double b = 1.0;

  double factor_squared(double m2) const { return a + b * m2; }
};

/// For the bound form E_k c_R^2 is affine in m2(nu); this returns its
/// coefficients for the current model and ensemble.
MomentWeight moment_weight(ObjectiveForm form, const BoundFactors& base,
                           const MetaTestEnsemble& q);

struct AmaObjective {
  double total = 0.0;
  double misfit = 0.0;
  double misfit_stderr = 0.0;
  double w2_squared = 0.0;      // E_k W2^2(nu, nu'_k)
  double factor_squared = 0.0;  // a + b m2(nu)
};

using Distribution = std::variant<GaussianMeasure, EmpiricalMeasure>;

/// Common random numbers for objective evaluations: standard normal draws
/// that are pushed through the current Gaussian, plus a fixed subsample of
/// each empirical atom for the W2 term.
struct ObjectiveSamples {
  Points misfit_normals;                 // samples_for_misfit x d
  std::vector<Points> w2_normals;        // per atom, n_k x d
  std::vector<std::vector<Index>> atom_subsets;

  static ObjectiveSamples draw(Index dim, Index misfit_samples, Index w2_samples,
                               const MetaTestEnsemble& q, RngStream& rng);
};

/// misfit + sqrt(a + b m2(nu)) sqrt(E W2^2). Gaussian nu: misfit by Monte Carlo
/// on the supplied normals; empirical nu: exact average over the particles.
AmaObjective ama_objective(const Distribution& nu, const KernelModel& model,
                           const ScalarOracle& target, const MetaTestEnsemble& q,
                           const MomentWeight& weight, const ObjectiveSamples& samples);

/// Convenience overload drawing fresh common random numbers.
AmaObjective ama_objective(const Distribution& nu, const KernelModel& model,
                           const ScalarOracle& target, const MetaTestEnsemble& q,
                           const MomentWeight& weight, Index misfit_samples,
                           Index w2_samples, RngStream& rng);

/// Score-function gradient of the objective over Gaussian parameters; the
/// atoms must all be Gaussian. Shares n samples between all terms.
ParamGradient gaussian_param_update(const GaussianMeasure& nu, const KernelModel& model,
                                    const ScalarOracle& target, const MetaTestEnsemble& q,
                                    const MomentWeight& weight, Index n, RngStream& rng);

/// Wasserstein gradient of the objective at each particle.
Points particle_gradient(const EmpiricalMeasure& particles, const KernelModel& model,
                         const ScalarOracle& target, const MetaTestEnsemble& q,
                         const MomentWeight& weight);

/// Moves each particle by -eta times its Wasserstein gradient.
EmpiricalMeasure particle_update(const EmpiricalMeasure& particles, const KernelModel& model,
                                 const ScalarOracle& target, const MetaTestEnsemble& q,
                                 const MomentWeight& weight, double eta);

/// Largest Lipschitz estimate among the probe models.
double estimate_R(const std::vector<KernelModel>& probes, const std::vector<PointPair>& pairs);

enum class AmaFamily { kGaussian, kParticles };

struct AmaConfig {
  /// Negative values request the probe-based estimate.
  double R = -1.0;
  double lip_target = -1.0;
  Index outer_iterations = 50;
  Index samples_for_misfit = 2000;
  Index w2_mc_samples = 500;
  Index gradient_samples = 2000;
  Index fit_samples = 250;
  double lengthscale = 1.0;
  double step_size = 1e-2;
  bool step_halving = true;
  int max_halvings = 40;
  double tol_step = 1e-6;
  ObjectiveForm form = ObjectiveForm::kBound;
  bool mean_only = false;
  Index probe_count = 11;
  Index probe_pairs = 250;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LipschitzConstants {
  double target;
  double model_cap;
};

/// Probe distributions interpolate between nu0 and the moment-matched
/// Gaussian of the ensemble; pairs are drawn from each.
LipschitzConstants estimate_lipschitz(const AmaConfig& config, const ScalarOracle& target,
                                      const MetaTestEnsemble& q, const Distribution& nu0);

/// Alternates model fitting and distribution updates. When evaluation is
/// given, Err of the current model is recorded on both splits. Each accepted half-step is
/// recorded; an update that raises the objective is rejected and, with
/// halving on, retried at half the step size.
OptimizationTrace ama_loop(const AmaConfig& config, AmaFamily family, const ScalarOracle& target,
                           const MetaTestEnsemble& q, const Distribution& nu0,
                           const LabeledSplit* evaluation = nullptr);

}  // namespace ood

#pragma once

#include "ood/kernel.hpp"
#include "ood/oracle.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ood {

enum class TargetKind { kG1, kG2, kG3, kG4 };

/// Benchmark regression targets on R^d.
///   g1  Sobol G product
///   g2  Friedman-1 (reads x1..x5)
///   g3  Friedman-2 (reads x1..x4)
///   g4  fixed random kernel expansion with 1000 terms
class TargetFunction {
 public:
  TargetFunction(TargetKind kind, Index dim, std::uint64_t seed = 0);
  /// Parses "g1".."g4"; throws a config error otherwise.
  static TargetFunction from_id(const std::string& id, Index dim, std::uint64_t seed = 0);
  /// g4-type expansion with explicit centers (one per row) and coefficients.
  static TargetFunction kernel_expansion(Points centers, Vector coefficients,
                                         double lengthscale = 5.0);

  TargetKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  std::string id() const;

  double operator()(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  ScalarOracle oracle() const;

  /// Kernel lengthscale used for this target in the benchmark protocol.
  double default_lengthscale() const;
  /// Initial training mean: origin for g1, (1/2, ..., 1/2) otherwise.
  Vector default_initial_mean() const;

  const Points& expansion_centers() const { return centers_; }
  const Vector& expansion_coefficients() const { return coefficients_; }

 private:
  TargetKind kind_;
  Index dim_;
  Points centers_;
  Vector coefficients_;
  double expansion_lengthscale_ = 5.0;
};

double eval_target(const TargetFunction& t, const Vector& x);

/// Gaussian test atoms with their realized samples and a fixed
/// validation/test split of each atom's samples.
struct BenchmarkEnsemble {
  MetaTestEnsemble gaussians;
  std::vector<EmpiricalMeasure> validation;
  std::vector<EmpiricalMeasure> test;
  /// All M samples of every atom.
  std::vector<EmpiricalMeasure> full;
  std::vector<double> weights;

  MetaTestEnsemble samples() const;
  Index dim() const { return gaussians.dim(); }
};

/// K atoms N(m', C') with m' ~ N(0, I) and C' ~ Wishart(I, d + 1), M samples
/// each; the first round(M / 10) samples of every atom are the validation split.
BenchmarkEnsemble make_meta_ensemble(Index k, Index d, Index m, RngStream& rng);

struct LabeledSplit {
  LabeledEnsemble validation;
  LabeledEnsemble test;
};

LabeledSplit label_split(const BenchmarkEnsemble& ensemble, const ScalarOracle& target);

/// sqrt(sum_k w_k mean (y - model)^2 / sum_k w_k mean y^2).
double err_metric(const KernelModel& model, const LabeledEnsemble& test);
double err_from_predictions(const LabeledEnsemble& data, const std::vector<Vector>& predictions);

enum class BaselineKind { kNormal, kBarycenter, kMixture, kUniform };

BaselineKind baseline_from_name(const std::string& name);
std::string baseline_name(BaselineKind kind);

using Sampler = std::function<Points(Index n, RngStream& rng)>;

/// Normal: N(initial_mean, I). Barycenter: W2 barycenter of Gaussians fitted
/// to the atom samples. Mixture: equal mixture of those fitted Gaussians.
/// Uniform: Unif([0,1]^d).
Sampler baseline_distribution(BaselineKind kind, const Vector& initial_mean,
                              const std::vector<EmpiricalMeasure>& atom_samples = {});

Sampler gaussian_sampler(const GaussianMeasure& g);

using FeatureDistance = std::function<double(Index, Index)>;

/// Greedy maxmin (k-center) selection until k indices are chosen, starting
/// from init. Ties go to the lowest index.
std::vector<Index> coreset_select(Index pool_size, Index k, const std::vector<Index>& init,
                                  const FeatureDistance& distance);
/// Euclidean distance between rows of features.
std::vector<Index> coreset_select(const Points& features, Index k,
                                  const std::vector<Index>& init);

/// RKHS distance between kernel sections, sqrt(2 (1 - k(a, b))).
double rkhs_distance(const Vector& a, const Vector& b, double lengthscale);

/// Nonadaptive coreset on the pool using the RKHS metric, initial size one.
std::vector<Index> ncoreset(const Points& pool, Index k, double lengthscale, RngStream& rng);

struct AdaptiveCoresetOptions {
  Index initial = 6;
  Index batch = 10;
  Index sketch_threshold = 256;
  Index sketch_dim = 32;
};

/// Adaptive coreset: batches chosen by maxmin on the features
/// c_n k(u_n, v) of the model fitted to the current selection.
std::vector<Index> acoreset(const Points& pool, const Vector& pool_labels, Index k,
                            double lengthscale, RngStream& rng,
                            const AdaptiveCoresetOptions& options = {});

}  // namespace ood

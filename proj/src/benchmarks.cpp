#include "ood/benchmarks.hpp"

#include "ood/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ood {
namespace {

constexpr Index kExpansionTerms = 1000;
constexpr double kDenominatorFloor = 1e-12;

double floored(double x) {
  if (std::abs(x) >= kDenominatorFloor) return x;
  return x < 0.0 ? -kDenominatorFloor : kDenominatorFloor;
}

double g1_factor(double x, Index j) {
  // j is 1-based.
  const double a = (static_cast<double>(j) - 2.0) / 2.0;
  return (std::abs(4.0 * x - 2.0) + a) / (1.0 + a);
}

double g1_factor_slope(double x, Index j) {
  const double a = (static_cast<double>(j) - 2.0) / 2.0;
  const double s = 4.0 * x - 2.0;
  const double sign = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
  return 4.0 * sign / (1.0 + a);
}

struct G3Parts {
  double w, den, q, value;
};

G3Parts g3_parts(const Vector& x) {
  G3Parts p;
  p.w = 520.0 * std::numbers::pi * x(1) + 40.0 * std::numbers::pi;
  p.den = floored(p.w * (10.0 * x(3) + 1.0));
  p.q = x(2) * p.w - 1.0 / p.den;
  p.value = std::sqrt(100.0 * x(0) * 100.0 * x(0) + p.q * p.q);
  return p;
}

Index validation_count(Index m) {
  return std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(m) / 10.0)));
}

double weighted_sum(const LabeledEnsemble& data, const std::vector<Vector>& values) {
  double s = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k)
    s += data.weights[k] * values[k].squaredNorm() / static_cast<double>(values[k].size());
  return s;
}

}  // namespace

TargetFunction::TargetFunction(TargetKind kind, Index dim, std::uint64_t seed)
    : kind_(kind), dim_(dim) {
  require(dim >= 1, ErrorCode::kInvalidArgument, "dimension must be >= 1");
  if (kind == TargetKind::kG2)
    require(dim >= 5, ErrorCode::kInvalidArgument, "g2 needs d >= 5");
  if (kind == TargetKind::kG3)
    require(dim >= 4, ErrorCode::kInvalidArgument, "g3 needs d >= 4");
  if (kind == TargetKind::kG4) {
    RngStream rng(seed, 0x6734);
    coefficients_.resize(kExpansionTerms);
    centers_.resize(kExpansionTerms, dim);
    for (Index l = 0; l < kExpansionTerms; ++l) {
      coefficients_(l) = 2.0 * rng.uniform() - 1.0;
      for (Index j = 0; j < dim; ++j) centers_(l, j) = 8.0 * rng.uniform() - 4.0;
    }
  }
}

TargetFunction TargetFunction::from_id(const std::string& id, Index dim, std::uint64_t seed) {
  if (id == "g1") return TargetFunction(TargetKind::kG1, dim, seed);
  if (id == "g2") return TargetFunction(TargetKind::kG2, dim, seed);
  if (id == "g3") return TargetFunction(TargetKind::kG3, dim, seed);
  if (id == "g4") return TargetFunction(TargetKind::kG4, dim, seed);
  throw Error(ErrorCode::kConfig, "unknown target id '" + id + "'");
}

TargetFunction TargetFunction::kernel_expansion(Points centers, Vector coefficients,
                                                double lengthscale) {
  require(centers.rows() == coefficients.size() && centers.rows() >= 1,
          ErrorCode::kDimensionMismatch, "one coefficient per center");
  TargetFunction t(TargetKind::kG1, centers.cols());
  t.kind_ = TargetKind::kG4;
  t.centers_ = std::move(centers);
  t.coefficients_ = std::move(coefficients);
  t.expansion_lengthscale_ = lengthscale;
  return t;
}

std::string TargetFunction::id() const {
  switch (kind_) {
    case TargetKind::kG1: return "g1";
    case TargetKind::kG2: return "g2";
    case TargetKind::kG3: return "g3";
    case TargetKind::kG4: return "g4";
  }
  return "?";
}

double TargetFunction::operator()(const Vector& x) const {
  require(x.size() == dim_, ErrorCode::kDimensionMismatch, "target input dimension");
  switch (kind_) {
    case TargetKind::kG1: {
      double p = 1.0;
      for (Index j = 0; j < dim_; ++j) p *= g1_factor(x(j), j + 1);
      return p;
    }
    case TargetKind::kG2:
      return 10.0 * std::sin(std::numbers::pi * x(0) * x(1)) +
             20.0 * (x(2) - 0.5) * (x(2) - 0.5) + 10.0 * x(3) + 5.0 * x(4);
    case TargetKind::kG3:
      return g3_parts(x).value;
    case TargetKind::kG4: {
      const double l2 = expansion_lengthscale_ * expansion_lengthscale_;
      const Vector d2 = (centers_.rowwise() - x.transpose()).rowwise().squaredNorm();
      return (-d2.array() / l2).exp().matrix().dot(coefficients_);
    }
  }
  return 0.0;
}

Vector TargetFunction::gradient(const Vector& x) const {
  require(x.size() == dim_, ErrorCode::kDimensionMismatch, "target input dimension");
  Vector g = Vector::Zero(dim_);
  switch (kind_) {
    case TargetKind::kG1: {
      for (Index j = 0; j < dim_; ++j) {
        double p = g1_factor_slope(x(j), j + 1);
        for (Index i = 0; i < dim_; ++i)
          if (i != j) p *= g1_factor(x(i), i + 1);
        g(j) = p;
      }
      break;
    }
    case TargetKind::kG2: {
      const double c = 10.0 * std::numbers::pi * std::cos(std::numbers::pi * x(0) * x(1));
      g(0) = c * x(1);
      g(1) = c * x(0);
      g(2) = 40.0 * (x(2) - 0.5);
      g(3) = 10.0;
      g(4) = 5.0;
      break;
    }
    case TargetKind::kG3: {
      const G3Parts p = g3_parts(x);
      if (p.value == 0.0) break;
      const double a = 10.0 * x(3) + 1.0;
      const double dq1 = 520.0 * std::numbers::pi * (x(2) + a / (p.den * p.den));
      const double dq3 = 10.0 * p.w / (p.den * p.den);
      g(0) = 1e4 * x(0) / p.value;
      g(1) = p.q * dq1 / p.value;
      g(2) = p.q * p.w / p.value;
      g(3) = p.q * dq3 / p.value;
      break;
    }
    case TargetKind::kG4: {
      const double l2 = expansion_lengthscale_ * expansion_lengthscale_;
      for (Index l = 0; l < centers_.rows(); ++l) {
        const Vector diff = x - centers_.row(l).transpose();
        g += coefficients_(l) * std::exp(-diff.squaredNorm() / l2) * (-2.0 / l2) * diff;
      }
      break;
    }
  }
  return g;
}

ScalarOracle TargetFunction::oracle() const {
  auto self = std::make_shared<TargetFunction>(*this);
  return {[self](const Vector& x) { return (*self)(x); },
          [self](const Vector& x) { return self->gradient(x); }};
}

double TargetFunction::default_lengthscale() const {
  switch (kind_) {
    case TargetKind::kG1: return 1.0;
    case TargetKind::kG2: return 3.0;
    case TargetKind::kG3: return 2.0 / 1.1;
    case TargetKind::kG4: return 5.0;
  }
  return 1.0;
}

Vector TargetFunction::default_initial_mean() const {
  if (kind_ == TargetKind::kG1) return Vector::Zero(dim_);
  return Vector::Constant(dim_, 0.5);
}

double eval_target(const TargetFunction& t, const Vector& x) { return t(x); }

MetaTestEnsemble BenchmarkEnsemble::samples() const {
  return MetaTestEnsemble(std::vector<Atom>(full.begin(), full.end()), weights);
}

BenchmarkEnsemble make_meta_ensemble(Index k, Index d, Index m, RngStream& rng) {
  require(k >= 1 && m >= 1 && d >= 1, ErrorCode::kInvalidArgument, "K, M, d must be >= 1");
  std::vector<Atom> atoms;
  std::vector<EmpiricalMeasure> validation, test, full;
  const Index nv = validation_count(m);
  for (Index a = 0; a < k; ++a) {
    RngStream atom_rng = rng.split(static_cast<std::uint64_t>(a));
    Vector mean = atom_rng.normal_vector(d);
    const Matrix cov = sample_wishart(d, d + 1, atom_rng);
    GaussianMeasure g = GaussianMeasure::from_covariance(std::move(mean), cov);
    const Points pts = sample_gaussian(g, m, atom_rng).points();
    validation.emplace_back(pts.topRows(nv));
    // With a single sample both splits see it.
    test.emplace_back(m > nv ? Points(pts.bottomRows(m - nv)) : Points(pts));
    full.emplace_back(pts);
    atoms.emplace_back(std::move(g));
  }
  std::vector<double> w(static_cast<std::size_t>(k), 1.0 / static_cast<double>(k));
  return BenchmarkEnsemble{MetaTestEnsemble(std::move(atoms), w), std::move(validation),
                           std::move(test), std::move(full), w};
}

LabeledSplit label_split(const BenchmarkEnsemble& ensemble, const ScalarOracle& target) {
  return LabeledSplit{label_atoms(ensemble.validation, ensemble.weights, target),
                      label_atoms(ensemble.test, ensemble.weights, target)};
}

double err_from_predictions(const LabeledEnsemble& data, const std::vector<Vector>& predictions) {
  require(predictions.size() == data.atoms.size(), ErrorCode::kDimensionMismatch,
          "one prediction vector per atom");
  std::vector<Vector> diff;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    require(predictions[k].size() == data.labels[k].size(), ErrorCode::kDimensionMismatch,
            "one prediction per point");
    diff.push_back(data.labels[k] - predictions[k]);
  }
  const double den = weighted_sum(data, data.labels);
  require(den > 0.0, ErrorCode::kDegenerateTarget, "target vanishes on the test atoms");
  return std::sqrt(weighted_sum(data, diff) / den);
}

double err_metric(const KernelModel& model, const LabeledEnsemble& test) {
  test.validate();
  std::vector<Vector> preds;
  for (const auto& a : test.atoms) preds.push_back(predict(model, a.points()));
  return err_from_predictions(test, preds);
}

BaselineKind baseline_from_name(const std::string& name) {
  if (name == "normal") return BaselineKind::kNormal;
  if (name == "barycenter") return BaselineKind::kBarycenter;
  if (name == "mixture") return BaselineKind::kMixture;
  if (name == "uniform") return BaselineKind::kUniform;
  throw Error(ErrorCode::kConfig, "unknown baseline '" + name + "'");
}

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kNormal: return "normal";
    case BaselineKind::kBarycenter: return "barycenter";
    case BaselineKind::kMixture: return "mixture";
    case BaselineKind::kUniform: return "uniform";
  }
  return "?";
}

Sampler gaussian_sampler(const GaussianMeasure& g) {
  return [g](Index n, RngStream& rng) { return sample_gaussian(g, n, rng).points(); };
}

Sampler baseline_distribution(BaselineKind kind, const Vector& initial_mean,
                              const std::vector<EmpiricalMeasure>& atom_samples) {
  const Index d = initial_mean.size();
  if (kind == BaselineKind::kNormal)
    return gaussian_sampler(GaussianMeasure(initial_mean, Matrix::Identity(d, d)));
  if (kind == BaselineKind::kUniform) {
    return [d](Index n, RngStream& rng) {
      Points out(n, d);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) out(i, j) = rng.uniform();
      return out;
    };
  }

  require(!atom_samples.empty(), ErrorCode::kInvalidArgument,
          "barycenter and mixture baselines need the ensemble samples");
  std::vector<Atom> fitted;
  for (const auto& e : atom_samples) {
    require(e.dim() == d, ErrorCode::kDimensionMismatch, "atom dimension");
    fitted.emplace_back(GaussianMeasure::from_covariance(e.mean(), e.covariance()));
  }
  MetaTestEnsemble q(std::move(fitted));
  if (kind == BaselineKind::kBarycenter) return gaussian_sampler(gaussian_barycenter(q));

  return [q](Index n, RngStream& rng) {
    const Index d = q.dim();
    Points out(n, d);
    for (Index i = 0; i < n; ++i) {
      // Uniform weights, so the component is a uniform index.
      const auto k = static_cast<Index>(rng.below(static_cast<std::uint64_t>(q.size())));
      const GaussianMeasure& g = q.gaussian(k);
      out.row(i) = (g.mean() + g.cov_factor() * rng.normal_vector(d)).transpose();
    }
    return out;
  };
}

std::vector<Index> coreset_select(Index pool_size, Index k, const std::vector<Index>& init,
                                  const FeatureDistance& distance) {
  require(!init.empty(), ErrorCode::kInvalidArgument, "initial selection must be nonempty");
  require(k <= pool_size, ErrorCode::kExhaustedPool, "k exceeds the pool size");
  std::vector<Index> selected;
  std::vector<char> taken(static_cast<std::size_t>(pool_size), 0);
  for (Index i : init) {
    require(i >= 0 && i < pool_size, ErrorCode::kInvalidArgument, "initial index out of range");
    if (taken[static_cast<std::size_t>(i)]) continue;
    taken[static_cast<std::size_t>(i)] = 1;
    selected.push_back(i);
  }
  std::vector<double> min_dist(static_cast<std::size_t>(pool_size),
                               std::numeric_limits<double>::infinity());
  auto absorb = [&](Index s) {
    for (Index i = 0; i < pool_size; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      auto& md = min_dist[static_cast<std::size_t>(i)];
      md = std::min(md, distance(i, s));
    }
  };
  for (Index s : selected) absorb(s);

  while (static_cast<Index>(selected.size()) < k) {
    Index best = -1;
    double best_d = -1.0;
    for (Index i = 0; i < pool_size; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (min_dist[static_cast<std::size_t>(i)] > best_d) {
        best_d = min_dist[static_cast<std::size_t>(i)];
        best = i;
      }
    }
    taken[static_cast<std::size_t>(best)] = 1;
    selected.push_back(best);
    absorb(best);
  }
  return selected;
}

std::vector<Index> coreset_select(const Points& features, Index k,
                                  const std::vector<Index>& init) {
  return coreset_select(features.rows(), k, init, [&features](Index i, Index j) {
    return (features.row(i) - features.row(j)).norm();
  });
}

double rkhs_distance(const Vector& a, const Vector& b, double lengthscale) {
  return std::sqrt(std::max(0.0, 2.0 * (1.0 - kernel_eval(a, b, lengthscale))));
}

std::vector<Index> ncoreset(const Points& pool, Index k, double lengthscale, RngStream& rng) {
  require(pool.rows() >= 1, ErrorCode::kInvalidArgument, "empty pool");
  const auto first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(pool.rows())));
  const double l2 = lengthscale * lengthscale;
  return coreset_select(pool.rows(), k, {first}, [&pool, l2](Index i, Index j) {
    const double k_ij = std::exp(-(pool.row(i) - pool.row(j)).squaredNorm() / l2);
    return std::sqrt(std::max(0.0, 2.0 * (1.0 - k_ij)));
  });
}

std::vector<Index> acoreset(const Points& pool, const Vector& pool_labels, Index k,
                            double lengthscale, RngStream& rng,
                            const AdaptiveCoresetOptions& options) {
  const Index n_pool = pool.rows();
  require(pool_labels.size() == n_pool, ErrorCode::kDimensionMismatch, "one label per pool point");
  require(k <= n_pool, ErrorCode::kExhaustedPool, "k exceeds the pool size");
  require(options.initial >= 1 && options.batch >= 1, ErrorCode::kInvalidArgument,
          "initial and batch sizes must be >= 1");

  // Initial random subset without replacement (partial Fisher-Yates).
  std::vector<Index> perm(static_cast<std::size_t>(n_pool));
  for (Index i = 0; i < n_pool; ++i) perm[static_cast<std::size_t>(i)] = i;
  const Index n0 = std::min(options.initial, k);
  for (Index i = 0; i < n0; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n_pool - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<Index> selected(perm.begin(), perm.begin() + n0);

  while (static_cast<Index>(selected.size()) < k) {
    const auto n = static_cast<Index>(selected.size());
    Points x(n, pool.cols());
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      x.row(i) = pool.row(selected[static_cast<std::size_t>(i)]);
      y(i) = pool_labels(selected[static_cast<std::size_t>(i)]);
    }
    const KernelModel model = fit_krr(x, y, lengthscale, 1e-3 / static_cast<double>(n));
    // Row m holds (c_n k(u_n, v_m))_n.
    Matrix features = kernel_matrix(pool, x, lengthscale) * model.coefficients().asDiagonal();
    if (features.cols() > options.sketch_threshold) {
      const Matrix sketch = rng.normal_matrix(features.cols(), options.sketch_dim) /
                            std::sqrt(static_cast<double>(options.sketch_dim));
      features = features * sketch;
    }
    const Index target = std::min(k, n + options.batch);
    selected = coreset_select(features, target, selected);
  }
  return selected;
}

}  // namespace ood

#include "ood/ama.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace ood {
namespace {

constexpr double kEps = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vector atom_mean(const Atom& atom) {
  if (const auto* g = std::get_if<GaussianMeasure>(&atom)) return g->mean();
  return std::get<EmpiricalMeasure>(atom).mean();
}

Matrix atom_covariance(const Atom& atom) {
  if (const auto* g = std::get_if<GaussianMeasure>(&atom)) return g->covariance();
  return std::get<EmpiricalMeasure>(atom).covariance();
}

double distribution_moment(const Distribution& nu) {
  return std::visit([](const auto& m) { return second_moment(m); }, nu);
}

Index distribution_dim(const Distribution& nu) {
  return std::visit([](const auto& m) { return m.dim(); }, nu);
}

Points push_normals(const GaussianMeasure& g, const Points& z) {
  return (z * g.cov_factor().transpose()).rowwise() + g.mean().transpose();
}

// (W + eps) / (S^2 + eps) ratios appearing in every gradient.
struct Ratios {
  double moment;     // sqrt((W + eps) / (S^2 + eps))
  double transport;  // sqrt((S^2 + eps) / (W + eps))
};

Ratios ratios(double w2_squared, double factor_squared) {
  return {std::sqrt((w2_squared + kEps) / (factor_squared + kEps)),
          std::sqrt((factor_squared + kEps) / (w2_squared + kEps))};
}

TraceRecord summarize(const Distribution& nu) {
  TraceRecord r;
  if (const auto* g = std::get_if<GaussianMeasure>(&nu)) {
    r.mean = g->mean();
    r.cov_factor = g->cov_factor();
  } else {
    const auto& e = std::get<EmpiricalMeasure>(nu);
    r.mean = e.mean();
    r.cov_factor = summary_factor(e.covariance());
  }
  return r;
}

}  // namespace

double c_factor(const BoundFactors& b) {
  const double l = b.lip_target + b.lip_model_cap;
  return l * std::sqrt(4.0 * l * l * (b.moment + b.moment_atom) +
                       16.0 * (b.offset_target * b.offset_target +
                               b.offset_model * b.offset_model));
}

MomentWeight moment_weight(ObjectiveForm form, const BoundFactors& base,
                           const MetaTestEnsemble& q) {
  if (form == ObjectiveForm::kSurrogate) return {1.0, 1.0};
  // E_k c^2 = l^2 (4 l^2 (m2 + m2'_k) + 16 off^2), affine in m2.
  const double l = base.lip_target + base.lip_model_cap;
  const double off2 =
      base.offset_target * base.offset_target + base.offset_model * base.offset_model;
  double moment_atoms = 0.0;
  for (Index k = 0; k < q.size(); ++k) moment_atoms += q.weight(k) * second_moment(q.atom(k));
  return {l * l * (4.0 * l * l * moment_atoms + 16.0 * off2), 4.0 * l * l * l * l};
}

ObjectiveSamples ObjectiveSamples::draw(Index dim, Index misfit_samples, Index w2_samples,
                                        const MetaTestEnsemble& q, RngStream& rng) {
  require(misfit_samples >= 1 && w2_samples >= 1, ErrorCode::kInvalidArgument,
          "sample counts must be >= 1");
  ObjectiveSamples s;
  s.misfit_normals = rng.normal_matrix(misfit_samples, dim);
  for (Index k = 0; k < q.size(); ++k) {
    const auto* e = std::get_if<EmpiricalMeasure>(&q.atom(k));
    if (e == nullptr) {
      s.w2_normals.emplace_back();
      s.atom_subsets.emplace_back();
      continue;
    }
    const Index n = std::min(w2_samples, e->size());
    std::vector<Index> perm(static_cast<std::size_t>(e->size()));
    for (Index i = 0; i < e->size(); ++i) perm[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < n; ++i) {
      const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(e->size() - i)));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    perm.resize(static_cast<std::size_t>(n));
    s.atom_subsets.push_back(std::move(perm));
    s.w2_normals.push_back(rng.normal_matrix(n, dim));
  }
  return s;
}

AmaObjective ama_objective(const Distribution& nu, const KernelModel& model,
                           const ScalarOracle& target, const MetaTestEnsemble& q,
                           const MomentWeight& weight, const ObjectiveSamples& samples) {
  require(distribution_dim(nu) == q.dim() && model.dim() == q.dim(),
          ErrorCode::kDimensionMismatch, "distribution, model and ensemble dimensions");
  AmaObjective out;
  const auto* gauss = std::get_if<GaussianMeasure>(&nu);

  const Points u = gauss ? push_normals(*gauss, samples.misfit_normals)
                         : std::get<EmpiricalMeasure>(nu).points();
  const Vector f = (target.evaluate(u) - predict(model, u)).array().square().matrix();
  const auto n = static_cast<double>(f.size());
  out.misfit = f.mean();
  if (gauss && f.size() > 1) {
    const double var = (f.array() - out.misfit).square().sum() / (n - 1.0);
    out.misfit_stderr = std::sqrt(var / n);
  }

  double w2 = 0.0;
  for (Index k = 0; k < q.size(); ++k) {
    const Atom& atom = q.atom(k);
    double w2k = 0.0;
    if (gauss) {
      if (const auto* ga = std::get_if<GaussianMeasure>(&atom)) {
        w2k = w2_gaussian_squared(*gauss, *ga);
      } else {
        const auto& e = std::get<EmpiricalMeasure>(atom);
        const auto& subset = samples.atom_subsets.at(static_cast<std::size_t>(k));
        Points target_pts(static_cast<Index>(subset.size()), e.dim());
        for (std::size_t i = 0; i < subset.size(); ++i)
          target_pts.row(static_cast<Index>(i)) = e.points().row(subset[i]);
        const Points src = push_normals(*gauss, samples.w2_normals.at(static_cast<std::size_t>(k)));
        w2k = w2_empirical_plan(EmpiricalMeasure(src), EmpiricalMeasure(std::move(target_pts)))
                  .w2_squared;
      }
    } else {
      const auto* e = std::get_if<EmpiricalMeasure>(&atom);
      require(e != nullptr, ErrorCode::kUnsupportedConfiguration,
              "particle distributions need empirical atoms");
      w2k = w2_empirical_plan(std::get<EmpiricalMeasure>(nu), *e).w2_squared;
    }
    w2 += q.weight(k) * w2k;
  }
  out.w2_squared = w2;
  out.factor_squared = weight.factor_squared(distribution_moment(nu));
  out.total = out.misfit + std::sqrt(out.factor_squared) * std::sqrt(out.w2_squared);
  return out;
}

AmaObjective ama_objective(const Distribution& nu, const KernelModel& model,
                           const ScalarOracle& target, const MetaTestEnsemble& q,
                           const MomentWeight& weight, Index misfit_samples,
                           Index w2_samples, RngStream& rng) {
  const ObjectiveSamples s =
      ObjectiveSamples::draw(distribution_dim(nu), misfit_samples, w2_samples, q, rng);
  return ama_objective(nu, model, target, q, weight, s);
}

ParamGradient gaussian_param_update(const GaussianMeasure& nu, const KernelModel& model,
                                    const ScalarOracle& target, const MetaTestEnsemble& q,
                                    const MomentWeight& weight, Index n, RngStream& rng) {
  require(n >= 2, ErrorCode::kInvalidArgument, "need at least two samples");
  require(q.dim() == nu.dim() && model.dim() == nu.dim(), ErrorCode::kDimensionMismatch,
          "distribution, model and ensemble dimensions");
  const Index d = nu.dim();

  // Averaged OT data: sum_k w_k A_k and sum_k w_k m'_k.
  Matrix a_bar = Matrix::Zero(d, d);
  Vector m_bar = Vector::Zero(d);
  double w2 = 0.0;
  for (Index k = 0; k < q.size(); ++k) {
    const GaussianMeasure& atom = q.gaussian(k);
    a_bar += q.weight(k) * gaussian_ot_linear(nu, atom);
    m_bar += q.weight(k) * atom.mean();
    w2 += q.weight(k) * w2_gaussian_squared(nu, atom);
  }
  const double s2 = weight.factor_squared(second_moment(nu));
  const Ratios rt = ratios(w2, s2);

  const Points u = sample_gaussian(nu, n, rng).points();
  const Vector f = (target.evaluate(u) - predict(model, u)).array().square().matrix();
  const Matrix i_minus_a = Matrix::Identity(d, d) - a_bar;
  const Vector lin = a_bar * nu.mean() - m_bar;
  // Integrand h = f + first variations of the moment and transport terms.
  const Vector quad = ((u * i_minus_a).cwiseProduct(u)).rowwise().sum();
  Vector h = f + 0.5 * weight.b * rt.moment * u.rowwise().squaredNorm() +
             rt.transport * (0.5 * quad + u * lin);
  // Scores have zero mean, so centering h only removes variance.
  h.array() -= h.mean();
  ParamGradient g = score_weighted_sum(nu, u, h / static_cast<double>(n));
  return g;
}

Points particle_gradient(const EmpiricalMeasure& particles, const KernelModel& model,
                         const ScalarOracle& target, const MetaTestEnsemble& q,
                         const MomentWeight& weight) {
  require(particles.dim() == q.dim() && model.dim() == q.dim(), ErrorCode::kDimensionMismatch,
          "particles, model and ensemble dimensions");
  const Index n = particles.size();
  const Points& u = particles.points();

  Points transported = Points::Zero(n, u.cols());
  double w2 = 0.0;
  for (Index k = 0; k < q.size(); ++k) {
    const auto* e = std::get_if<EmpiricalMeasure>(&q.atom(k));
    require(e != nullptr, ErrorCode::kUnsupportedConfiguration,
            "particle updates need empirical atoms");
    require(e->size() == n, ErrorCode::kDimensionMismatch,
            "atoms must have as many points as there are particles");
    const EmpiricalTransport plan = w2_empirical_plan(particles, *e);
    for (Index i = 0; i < n; ++i)
      transported.row(i) += q.weight(k) * e->points().row(plan.matching[static_cast<std::size_t>(i)]);
    w2 += q.weight(k) * plan.w2_squared;
  }
  const Ratios rt = ratios(w2, weight.factor_squared(second_moment(particles)));

  Points grad(n, u.cols());
  for (Index i = 0; i < n; ++i) {
    const Vector ui = u.row(i).transpose();
    const double resid = model(ui) - target(ui);
    const Vector grad_f = 2.0 * resid * (predict_gradient(model, ui) - oracle_gradient(target, ui));
    grad.row(i) = (grad_f + weight.b * rt.moment * ui +
                   rt.transport * (ui - transported.row(i).transpose()))
                      .transpose();
  }
  return grad;
}

EmpiricalMeasure particle_update(const EmpiricalMeasure& particles, const KernelModel& model,
                                 const ScalarOracle& target, const MetaTestEnsemble& q,
                                 const MomentWeight& weight, double eta) {
  if (eta == 0.0) return particles;
  return EmpiricalMeasure(particles.points() -
                          eta * particle_gradient(particles, model, target, q, weight));
}

double estimate_R(const std::vector<KernelModel>& probes, const std::vector<PointPair>& pairs) {
  require(!probes.empty(), ErrorCode::kInvalidArgument, "need at least one probe model");
  double best = 0.0;
  for (const auto& model : probes) {
    const VectorMap eval = [&model](const Vector& x) { return Vector::Constant(1, model(x)); };
    best = std::max(best, lipschitz_estimate(eval, pairs));
  }
  return best;
}

void AmaConfig::validate() const {
  require(outer_iterations >= 0, ErrorCode::kConfig, "outer_iterations must be >= 0");
  require(samples_for_misfit >= 1 && w2_mc_samples >= 1 && gradient_samples >= 2 &&
              fit_samples >= 1 && probe_count >= 1 && probe_pairs >= 1,
          ErrorCode::kConfig, "sample counts must be positive");
  require(lengthscale > 0.0, ErrorCode::kConfig, "lengthscale must be positive");
  require(step_size > 0.0, ErrorCode::kConfig, "step_size must be positive");
  require(tol_step >= 0.0, ErrorCode::kConfig, "tol_step must be nonnegative");
  require(max_halvings >= 0, ErrorCode::kConfig, "max_halvings must be nonnegative");
}

LipschitzConstants estimate_lipschitz(const AmaConfig& config, const ScalarOracle& target,
                                      const MetaTestEnsemble& q, const Distribution& nu0) {
  const Index d = q.dim();
  const TraceRecord start = summarize(nu0);

  // Moment-matched Gaussian of the whole ensemble.
  Vector m_q = Vector::Zero(d);
  Matrix second = Matrix::Zero(d, d);
  for (Index k = 0; k < q.size(); ++k) {
    const Vector mk = atom_mean(q.atom(k));
    m_q += q.weight(k) * mk;
    second += q.weight(k) * (atom_covariance(q.atom(k)) + mk * mk.transpose());
  }
  const Matrix l_q = summary_factor(second - m_q * m_q.transpose());

  const RngStream base(config.seed, 0x6c6970);
  std::vector<KernelModel> probes;
  std::vector<PointPair> pairs;
  for (Index p = 0; p < config.probe_count; ++p) {
    const double t = config.probe_count == 1
                         ? 0.0
                         : static_cast<double>(p) / static_cast<double>(config.probe_count - 1);
    const GaussianMeasure probe((1.0 - t) * start.mean + t * m_q,
                                project_psd((1.0 - t) * start.cov_factor + t * l_q));
    RngStream rng = base.split(static_cast<std::uint64_t>(p));
    const Points x = sample_gaussian(probe, config.fit_samples, rng).points();
    probes.push_back(fit_krr(x, target.evaluate(x), config.lengthscale,
                             1e-3 / static_cast<double>(x.rows())));
    for (Index i = 0; i < config.probe_pairs; ++i) {
      Vector a = sample_gaussian(probe, 1, rng).points().row(0).transpose();
      Vector b = sample_gaussian(probe, 1, rng).points().row(0).transpose();
      if ((a - b).norm() > 0.0) pairs.emplace_back(std::move(a), std::move(b));
    }
  }
  const VectorMap target_map = [&target](const Vector& x) {
    return Vector::Constant(1, target(x));
  };
  return {lipschitz_estimate(target_map, pairs), estimate_R(probes, pairs)};
}

OptimizationTrace ama_loop(const AmaConfig& config, AmaFamily family, const ScalarOracle& target,
                           const MetaTestEnsemble& q, const Distribution& nu0,
                           const LabeledSplit* evaluation) {
  config.validate();
  const Index d = q.dim();
  require(distribution_dim(nu0) == d, ErrorCode::kDimensionMismatch,
          "initial distribution dimension");
  const bool gaussian = family == AmaFamily::kGaussian;
  require(gaussian == std::holds_alternative<GaussianMeasure>(nu0),
          ErrorCode::kUnsupportedConfiguration, "initial distribution does not match the family");

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const RngStream base(config.seed, 0x616d61);

  LipschitzConstants lip{config.lip_target, config.R};
  if (lip.target < 0.0 || lip.model_cap < 0.0) {
    const LipschitzConstants est = estimate_lipschitz(config, target, q, nu0);
    if (lip.target < 0.0) lip.target = est.target;
    if (lip.model_cap < 0.0) lip.model_cap = est.model_cap;
  }
  const double offset_target = std::abs(target(Vector::Zero(d)));

  RngStream crn_rng = base.split(1);
  const ObjectiveSamples crn =
      ObjectiveSamples::draw(d, config.samples_for_misfit, config.w2_mc_samples, q, crn_rng);

  auto fit_model = [&](const Distribution& nu, Index round) {
    Points x;
    if (const auto* g = std::get_if<GaussianMeasure>(&nu)) {
      RngStream rng = base.split(0x1000 + static_cast<std::uint64_t>(round));
      x = sample_gaussian(*g, config.fit_samples, rng).points();
    } else {
      x = std::get<EmpiricalMeasure>(nu).points();
    }
    return fit_krr(x, target.evaluate(x), config.lengthscale,
                   1e-3 / static_cast<double>(x.rows()));
  };
  auto weight_for = [&](const KernelModel& model) {
    BoundFactors b;
    b.lip_target = lip.target;
    b.lip_model_cap = lip.model_cap;
    b.offset_target = offset_target;
    b.offset_model = std::abs(model(Vector::Zero(d)));
    return moment_weight(config.form, b, q);
  };
  auto evaluate = [&](const Distribution& nu, const KernelModel& model) {
    return ama_objective(nu, model, target, q, weight_for(model), crn);
  };

  OptimizationTrace trace;
  auto record = [&](Index iter, const Distribution& nu, const KernelModel& model,
                    const AmaObjective& obj, double grad_norm, double step, const char* phase) {
    TraceRecord r = summarize(nu);
    r.iter = iter;
    r.objective = obj.total;
    r.objective_stderr = obj.misfit_stderr;
    r.err_seen = evaluation ? err_metric(model, evaluation->validation) : kNaN;
    r.err_unseen = evaluation ? err_metric(model, evaluation->test) : kNaN;
    r.grad_norm = grad_norm;
    r.step_size = step;
    r.phase = phase;
    r.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    trace.records.push_back(std::move(r));
  };
  auto finish = [&](const Distribution& nu) {
    if (const auto* g = std::get_if<GaussianMeasure>(&nu))
      trace.final_gaussian = *g;
    else
      trace.final_particles = std::get<EmpiricalMeasure>(nu);
    return trace;
  };

  Distribution nu = nu0;
  KernelModel model = fit_model(nu, 0);
  AmaObjective obj = evaluate(nu, model);
  record(0, nu, model, obj, 0.0, 0.0, "init");
  if (!std::isfinite(obj.total)) {
    trace.status = "aborted: non-finite objective at iteration 0";
    return finish(nu);
  }
  if (obj.total <= 0.0) {
    trace.status = "converged: zero objective";
    return finish(nu);
  }

  double eta = config.step_size;
  for (Index it = 1; it <= config.outer_iterations; ++it) {
    // Model half-step: a refit that raises the objective is discarded.
    if (it > 1) {
      KernelModel refit = fit_model(nu, it);
      const AmaObjective refit_obj = evaluate(nu, refit);
      if (std::isfinite(refit_obj.total) && refit_obj.total <= obj.total) {
        model = std::move(refit);
        obj = refit_obj;
        record(it, nu, model, obj, 0.0, 0.0, "model");
      }
    }

    // Distribution half-step.
    const MomentWeight weight = weight_for(model);
    Points direction;
    ParamGradient pg;
    double grad_norm = 0.0;
    if (gaussian) {
      RngStream rng = base.split(0x2000 + static_cast<std::uint64_t>(it));
      pg = gaussian_param_update(std::get<GaussianMeasure>(nu), model, target, q, weight,
                                 config.gradient_samples, rng);
      if (config.mean_only) pg.cov_factor.setZero();
      grad_norm = pg.norm();
      if (!pg.finite()) {
        trace.status = "aborted: non-finite gradient at iteration " + std::to_string(it);
        return finish(nu);
      }
    } else {
      direction = particle_gradient(std::get<EmpiricalMeasure>(nu), model, target, q, weight);
      // Root-mean-square particle velocity.
      grad_norm = direction.norm() / std::sqrt(static_cast<double>(direction.rows()));
      if (!direction.allFinite()) {
        trace.status = "aborted: non-finite gradient at iteration " + std::to_string(it);
        return finish(nu);
      }
    }

    bool accepted = false;
    for (int halvings = 0;; ++halvings) {
      if (eta * grad_norm < config.tol_step) {
        trace.status = "converged: step below tolerance";
        return finish(nu);
      }
      Distribution candidate =
          gaussian ? Distribution(GaussianMeasure(
                         std::get<GaussianMeasure>(nu).mean() - eta * pg.mean,
                         project_psd(std::get<GaussianMeasure>(nu).cov_factor() -
                                     eta * pg.cov_factor)))
                   : Distribution(EmpiricalMeasure(std::get<EmpiricalMeasure>(nu).points() -
                                                   eta * direction));
      const AmaObjective cand_obj = evaluate(candidate, model);
      if (std::isfinite(cand_obj.total) && cand_obj.total <= obj.total) {
        nu = std::move(candidate);
        obj = cand_obj;
        accepted = true;
        break;
      }
      if (!config.step_halving || halvings >= config.max_halvings) break;
      eta *= 0.5;
    }
    if (!accepted) {
      if (config.step_halving) {
        trace.status = "converged: no decreasing step";
        return finish(nu);
      }
      continue;
    }
    record(it, nu, model, obj, grad_norm, eta, "distribution");
    if (obj.total <= 0.0) {
      trace.status = "converged: zero objective";
      return finish(nu);
    }
  }
  return finish(nu);
}

}  // namespace ood

// Acceptance suite: one PASS/FAIL line per criterion. Exit code is the number of failures.
// Optional arguments select criteria by number, e.g. `acceptance 3 5`.
#include "cli_support.hpp"
#include "ood/ama.hpp"
#include "ood/benchmarks.hpp"
#include "ood/bilevel.hpp"
#include "ood/config.hpp"
#include "ood/experiment.hpp"
#include "ood/transport.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

using namespace ood;
using namespace ood::testing;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::map<std::string, double> mean_err(const ExperimentResult& r) {
  std::map<std::string, double> out;
  for (const auto& s : r.summary)
    if (s.metric == "err") out[s.distribution] = s.mean;
  return out;
}

bool all_ok(const ExperimentResult& r, std::string& why) {
  for (const auto& rep : r.replicates)
    if (!rep.ok()) {
      why = "replicate " + std::to_string(rep.index) + " " + rep.status;
      return false;
    }
  return true;
}

Outcome g1_bilevel() {
  const ExperimentConfig cfg = parse_config_string(
      "[experiment]\ntarget = g1\ndim = 2\nseed = 0\nreplicates = 10\n"
      "[ensemble]\nK = 10\nM = 5000\n"
      "[bilevel]\niterations = 1000\nsamples_per_step = 250\ncompare = normal\n");
  const ExperimentResult r = run_experiment(Subcommand::kBilevel, cfg);
  std::string why;
  if (!all_ok(r, why)) return {false, why};
  const auto e = mean_err(r);
  const double opt = e.at("optimized"), normal = e.at("normal");
  return {opt < 0.15 && normal > 0.6,
          "Err(opt) = " + fmt(opt) + " (< 0.15), Err(Normal) = " + fmt(normal) + " (> 0.6)"};
}

Outcome g2_ordering() {
  const ExperimentConfig cfg = parse_config_string(
      "[experiment]\ntarget = g2\ndim = 5\nseed = 0\nreplicates = 5\n"
      "[ensemble]\nK = 10\nM = 5000\n"
      "[bilevel]\niterations = 1000\nsamples_per_step = 250\nnormalize_gradient = true\n"
      "lr_initial = 0.05\ncompare = normal, mixture\n");
  const ExperimentResult r = run_experiment(Subcommand::kBilevel, cfg);
  std::string why;
  if (!all_ok(r, why)) return {false, why};
  const auto e = mean_err(r);
  const double opt = e.at("optimized"), mix = e.at("mixture"), normal = e.at("normal");
  return {opt < mix && mix < normal, "Err(opt) = " + fmt(opt) + " < Err(Mixture) = " + fmt(mix) +
                                         " < Err(Normal) = " + fmt(normal)};
}

Outcome ama_monotone() {
  const ScalarOracle target{[](const Vector& x) { return x.squaredNorm(); },
                            [](const Vector& x) { return Vector(2.0 * x); }};
  const MetaTestEnsemble q(
      {Atom(GaussianMeasure(Vector::Constant(1, 2.0), Matrix::Constant(1, 1, 0.5)))});
  const GaussianMeasure nu0(Vector::Zero(1), Matrix::Identity(1, 1));
  int violations = 0;
  std::size_t steps = 0;
  double first = 0.0, last = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    AmaConfig cfg;
    cfg.seed = seed;
    cfg.outer_iterations = 30;
    const OptimizationTrace t = ama_loop(cfg, AmaFamily::kGaussian, target, q, nu0);
    if (t.aborted()) return {false, "seed " + std::to_string(seed) + " " + t.status};
    for (std::size_t k = 1; k < t.records.size(); ++k) {
      const auto& a = t.records[k - 1];
      const auto& b = t.records[k];
      const double se = std::hypot(a.objective_stderr, b.objective_stderr);
      if (b.objective > a.objective + 3.0 * se) ++violations;
      ++steps;
    }
    first += t.records.front().objective / 20.0;
    last += t.records.back().objective / 20.0;
  }
  return {violations == 0 && steps > 0,
          std::to_string(violations) + " increases beyond 3 SE over " + std::to_string(steps) +
              " steps; mean objective " + fmt(first) + " -> " + fmt(last)};
}

Outcome empirical_w2() {
  RngStream rng(2024);
  double worst = 0.0;
  for (int p = 0; p < 20; ++p) {
    const Index d = p < 10 ? 1 : 2;
    // Means at least 3 apart, so the separation dominates the finite-sample floor
    // (about 0.1 in W2 at n = 2000, d = 2).
    const GaussianMeasure a = random_gaussian(d, rng), c = random_gaussian(d, rng);
    const Vector dir = rng.normal_vector(d).normalized();
    const GaussianMeasure b = GaussianMeasure::from_covariance(
        Vector(a.mean() + (3.0 + rng.uniform()) * dir), c.covariance());
    const double exact = w2_gaussian(a, b);
    const double est = w2_empirical(sample_gaussian(a, 2000, rng), sample_gaussian(b, 2000, rng));
    worst = std::max(worst, std::abs(est - exact) / exact);
  }
  return {worst < 0.05, "max relative deviation " + fmt(worst) + " (< 0.05)"};
}

Outcome gradients() {
  RngStream rng(77);
  double sm = 0.0, sc = 0.0, pg = 0.0, kp = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Index d = 1 + static_cast<Index>(rng.below(4));
    const GaussianMeasure g = random_gaussian(d, rng);
    const Vector u = g.mean() + g.cov_factor() * rng.normal_vector(d);
    const Vector fdm = fd_gradient(
        [&](const Vector& m) { return log_density_oracle(m, g.cov_factor(), u); }, g.mean());
    sm = std::max(sm, rel_err(score_mean(g, u), fdm));

    Matrix fdl = Matrix::Zero(d, d);
    const double h = 1e-5;
    for (Index r = 0; r < d; ++r)
      for (Index c = 0; c <= r; ++c) {
        Matrix lp = g.cov_factor(), lm = g.cov_factor();
        lp(r, c) += h;
        lm(r, c) -= h;
        fdl(r, c) = (log_density_oracle(g.mean(), lp, u) - log_density_oracle(g.mean(), lm, u)) /
                    (2.0 * h);
      }
    sc = std::max(sc, rel_err(score_cholesky(g, u), fdl));

    const Index n = 3 + static_cast<Index>(rng.below(20));
    const KernelModel model =
        fit_krr(rng.normal_matrix(n, d), rng.normal_vector(n), 0.5 + 2.0 * rng.uniform(), 1e-3);
    const Vector x = rng.normal_vector(d);
    pg = std::max(pg, rel_err(predict_gradient(model, x),
                              fd_gradient([&](const Vector& v) { return model(v); }, x)));

    const GaussianMeasure b = random_gaussian(d, rng);
    const AffineMap t = gaussian_ot_map(g, b);
    kp = std::max(kp, rel_err(Vector(u - t(u)),
                              fd_gradient([&](const Vector& v) {
                                return kantorovich_potential(g, b, v);
                              }, u)));
  }

  // Bilevel gradient against the common-random-number finite difference,
  // d = 1, target x^2, one empirical atom, N = 40, averaged over seeds.
  const auto sq = [](const Vector& x) { return x.squaredNorm(); };
  const ScalarOracle target{sq, [](const Vector& x) { return Vector(2.0 * x); }};
  RngStream vrng(4);
  Points vp = vrng.normal_matrix(200, 1);
  vp.array() = 0.5 * vp.array() + 1.5;
  const LabeledEnsemble v = label_atoms({EmpiricalMeasure(vp)}, {1.0}, target);
  const GaussianMeasure theta(Vector::Zero(1), Matrix::Identity(1, 1));
  const int seeds = 400;
  Vector score = Vector::Zero(2), fd = Vector::Zero(2);
  for (int s = 0; s < seeds; ++s) {
    RngStream r(100 + static_cast<std::uint64_t>(s));
    const ParamGradient g = bilevel_gradient(theta, target, v, 40, 1e-3, 1.0, r);
    score += Vector((Vector(2) << g.mean(0), g.cov_factor(0, 0)).finished()) / seeds;
    RngStream zr(100000 + static_cast<std::uint64_t>(s));
    const Points z = zr.normal_matrix(40, 1);
    auto at = [&](double dm, double dl) {
      return crn_objective(Vector::Constant(1, dm), Matrix::Constant(1, 1, 1.0 + dl), z, sq, v,
                           1e-3, 1.0);
    };
    const double h = 1e-5;
    fd(0) += (at(h, 0.0) - at(-h, 0.0)) / (2.0 * h) / seeds;
    fd(1) += (at(0.0, h) - at(0.0, -h)) / (2.0 * h) / seeds;
  }
  const double cos = cosine(score, fd);
  const bool pass = sm < 1e-4 && sc < 1e-4 && pg < 1e-4 && kp < 1e-4 && cos > 0.9;
  return {pass, "max rel err score_mean " + fmt(sm) + ", score_cholesky " + fmt(sc) +
                    ", predict_gradient " + fmt(pg) + ", kantorovich " + fmt(kp) +
                    "; bilevel cosine " + fmt(cos)};
}

Outcome barycenters() {
  RngStream rng(5);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<GaussianMeasure> atoms;
    for (int k = 0; k < 5; ++k) atoms.push_back(random_gaussian(3, rng));
    const GaussianMeasure bar =
        gaussian_barycenter(MetaTestEnsemble(std::vector<Atom>(atoms.begin(), atoms.end())));
    worst = std::max(worst, fixed_point_residual(atoms, bar.covariance()));
  }
  // Equal covariances: the barycenter is the midpoint with the same covariance.
  const GaussianMeasure g = random_gaussian(3, rng);
  const GaussianMeasure h(rng.normal_vector(3), g.cov_factor());
  const GaussianMeasure mid = gaussian_barycenter(MetaTestEnsemble({Atom(g), Atom(h)}));
  const double mid_err = std::max((mid.mean() - 0.5 * (g.mean() + h.mean())).norm(),
                                  (mid.covariance() - g.covariance()).norm());
  // 1D: standard deviations average.
  const GaussianMeasure s1(Vector::Zero(1), Matrix::Constant(1, 1, 1.0));
  const GaussianMeasure s3(Vector::Zero(1), Matrix::Constant(1, 1, 3.0));
  const double std_err = std::abs(
      std::sqrt(gaussian_barycenter(MetaTestEnsemble({Atom(s1), Atom(s3)})).covariance()(0, 0)) -
      2.0);
  return {worst < 1e-8 && mid_err < 1e-8 && std_err < 1e-8,
          "max residual " + fmt(worst) + ", midpoint error " + fmt(mid_err) +
              ", 1D std error " + fmt(std_err)};
}

Outcome adjoints() {
  RngStream rng(9);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Index d = 1 + static_cast<Index>(rng.below(3));
    const Index n = 2 + static_cast<Index>(rng.below(30));
    const double l = 0.5 + rng.uniform(), nugget = 1e-3;
    const Points u = rng.normal_matrix(n, d);
    const KernelModel m = fit_krr(u, rng.normal_vector(n), l, nugget);
    std::vector<EmpiricalMeasure> atoms;
    std::vector<double> w;
    const Index k = 1 + static_cast<Index>(rng.below(4));
    for (Index j = 0; j < k; ++j) {
      atoms.emplace_back(rng.normal_matrix(3 + static_cast<Index>(rng.below(12)), d));
      w.push_back(1.0 / static_cast<double>(k));
    }
    const LabeledEnsemble v = label_atoms(
        std::move(atoms), w,
        ScalarOracle{[](const Vector& x) { return std::cos(x.sum()) + x.squaredNorm(); }, {}});
    worst = std::max(worst, rel_err(solve_adjoint(m, u, v, nugget), adjoint_oracle(m, u, v, nugget)));
  }
  return {worst < 1e-9, "max relative error " + fmt(worst) + " (< 1e-9)"};
}

Outcome coresets() {
  RngStream rng(11);
  int mismatches = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(49));
    const Index d = 1 + static_cast<Index>(rng.below(3));
    Points f(n, d);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j)
        f(i, j) = rep % 2 == 0 ? static_cast<double>(rng.below(4)) : rng.normal();
    const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    const std::vector<Index> init{static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)))};
    if (coreset_select(f, k, init) != naive_maxmin(f, k, init)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 50 pools differ from the oracle"};
}

Outcome determinism() {
  std::string bad;
  for (const auto& sub : subcommands()) {
    const auto dir = scratch_dir("acceptance_" + sub);
    const auto cfg = write_config(dir / "c.ini", config_for(sub, dir));
    const int ra = run_cli(sub, cfg, dir / "a");
    const int rb = run_cli(sub, cfg, dir / "b");
    if (ra != 0 || rb != 0 || !same_tree(dir / "a", dir / "b")) bad += " " + sub;
  }
  return {bad.empty(), bad.empty() ? "all six subcommands identical" : "differs:" + bad};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"g1 d=2 bilevel beats Normal", g1_bilevel},
      {"g2 d=5 ordering opt < Mixture < Normal", g2_ordering},
      {"ama-gaussian objective non-increasing", ama_monotone},
      {"empirical W2 within 5% of Gaussian W2", empirical_w2},
      {"gradients match finite differences", gradients},
      {"barycenter fixed point and analytic cases", barycenters},
      {"adjoint matches dense oracle", adjoints},
      {"coreset matches naive maxmin", coresets},
      {"subcommands byte-identical across runs", determinism},
  };
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const auto k = static_cast<std::size_t>(std::atoi(argv[a]));
    if (k >= 1 && k <= criteria.size()) selected[k - 1] = true;
  }
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << (i + 1) << "] " << criteria[i].first
              << ": " << o.detail << "  (" << fmt(secs) << " s)" << std::endl;
  }
  return failures;
}

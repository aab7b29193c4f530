#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ood/benchmarks.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace ood;
using ood::testing::naive_maxmin;
using ood::testing::rel_err;

namespace {

constexpr double kPi = std::numbers::pi;

double sobol_g(const Vector& x) {
  double p = 1.0;
  for (Index j = 0; j < x.size(); ++j) {
    const double a = (static_cast<double>(j + 1) - 2.0) / 2.0;
    p *= (std::abs(4.0 * x(j) - 2.0) + a) / (1.0 + a);
  }
  return p;
}

double friedman1(const Vector& x) {
  return 10.0 * std::sin(kPi * x(0) * x(1)) + 20.0 * std::pow(x(2) - 0.5, 2) + 10.0 * x(3) +
         5.0 * x(4);
}

double friedman2(const Vector& x) {
  const double w = 520.0 * kPi * x(1) + 40.0 * kPi;
  const double q = x(2) * w - 1.0 / (w * (10.0 * x(3) + 1.0));
  return std::sqrt(std::pow(100.0 * x(0), 2) + q * q);
}

LabeledEnsemble labeled(const std::vector<Points>& pts, const std::vector<Vector>& labels,
                        const std::vector<double>& w) {
  LabeledEnsemble e;
  for (const auto& p : pts) e.atoms.emplace_back(p);
  e.labels = labels;
  e.weights = w;
  return e;
}

}  // namespace

TEST_CASE("targets match their reference formulas") {
  RngStream rng(1);
  const TargetFunction g1(TargetKind::kG1, 3), g2(TargetKind::kG2, 6), g3(TargetKind::kG3, 4);
  for (int rep = 0; rep < 50; ++rep) {
    const Vector x3 = rng.normal_vector(3), x6 = rng.normal_vector(6);
    Vector x4(4);
    for (Index j = 0; j < 4; ++j) x4(j) = rng.uniform();
    CHECK(rel_err(g1(x3), sobol_g(x3)) < 1e-14);
    CHECK(rel_err(g2(x6), friedman1(x6)) < 1e-14);
    CHECK(rel_err(g3(x4), friedman2(x4)) < 1e-14);
  }
}

TEST_CASE("target examples") {
  const TargetFunction g1(TargetKind::kG1, 2), g2(TargetKind::kG2, 5);
  CHECK(g1(Vector::Constant(2, 0.5)) == 0.0);
  CHECK(g2(Vector::Zero(5)) == doctest::Approx(5.0).epsilon(1e-15));
  // First factor of g1 has a = -1/2.
  CHECK(g1(Vector::Zero(2)) == doctest::Approx(((2.0 - 0.5) / 0.5) * 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(TargetFunction(TargetKind::kG2, 4), Error);
  CHECK_THROWS_AS(TargetFunction::from_id("g9", 2), Error);
  CHECK(TargetFunction::from_id("g3", 4).id() == "g3");
}

TEST_CASE("kernel expansion target") {
  Points c(2, 1);
  c << 0.0, 1.0;
  const TargetFunction t = TargetFunction::kernel_expansion(c, Vector::Constant(2, 1.0), 1.0);
  CHECK(t(Vector::Zero(1)) == doctest::Approx(1.0 + std::exp(-1.0)).epsilon(1e-15));

  const TargetFunction g4a(TargetKind::kG4, 2, 7), g4b(TargetKind::kG4, 2, 7);
  CHECK(g4a.expansion_centers().rows() == 1000);
  CHECK(g4a(Vector::Ones(2)) == g4b(Vector::Ones(2)));
}

TEST_CASE("target gradients agree with finite differences away from kinks") {
  RngStream rng(2);
  const std::vector<TargetFunction> targets{TargetFunction(TargetKind::kG1, 3),
                                            TargetFunction(TargetKind::kG2, 5),
                                            TargetFunction(TargetKind::kG3, 4),
                                            TargetFunction(TargetKind::kG4, 2, 3)};
  for (const auto& t : targets) {
    for (int rep = 0; rep < 10; ++rep) {
      Vector x(t.dim());
      for (Index j = 0; j < x.size(); ++j) x(j) = 0.05 + 0.9 * rng.uniform();
      if (t.kind() == TargetKind::kG1 && ((4.0 * x.array() - 2.0).abs() < 1e-3).any()) continue;
      const Vector fd = ood::testing::fd_gradient([&](const Vector& u) { return t(u); }, x, 1e-6);
      CHECK(rel_err(t.gradient(x), fd) < 1e-5);
    }
  }
}

TEST_CASE("coreset selection examples") {
  Points line(5, 1);
  line << 0.0, 1.0, 2.0, 3.0, 10.0;
  const std::vector<Index> s = coreset_select(line, 3, {0});
  CHECK(s == std::vector<Index>{0, 4, 3});

  // Ties go to the lowest index.
  Points sym(3, 1);
  sym << 0.0, -1.0, 1.0;
  CHECK(coreset_select(sym, 2, {0}) == std::vector<Index>{0, 1});

  CHECK_THROWS_AS(coreset_select(line, 6, {0}), Error);
  CHECK_THROWS_AS(coreset_select(line, 2, {}), Error);
}

TEST_CASE("coreset selection equals the naive maxmin oracle") {
  RngStream rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(49));
    const Index d = 1 + static_cast<Index>(rng.below(3));
    Points f(n, d);
    // Integer grids produce many exact ties.
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) f(i, j) = static_cast<double>(rng.below(5));
    const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    const std::vector<Index> init{static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)))};
    const std::vector<Index> got = coreset_select(f, k, init);
    CHECK(got == naive_maxmin(f, k, init));
    CHECK(std::set<Index>(got.begin(), got.end()).size() == got.size());
  }
}

TEST_CASE("rkhs distance") {
  const Vector a = Vector::Zero(2);
  CHECK(rkhs_distance(a, a, 1.0) == 0.0);
  CHECK(rkhs_distance(a, Vector::Constant(2, 1e6), 1.0) == doctest::Approx(std::sqrt(2.0)));
  Vector b(2);
  b << 1.0, 0.0;
  CHECK(rkhs_distance(a, b, 1.0) ==
        doctest::Approx(std::sqrt(2.0 * (1.0 - std::exp(-1.0)))).epsilon(1e-15));
}

TEST_CASE("ncoreset and acoreset select distinct pool points deterministically") {
  RngStream rng(4);
  const Points pool = rng.normal_matrix(120, 2);
  Vector labels(120);
  for (Index i = 0; i < 120; ++i) labels(i) = std::sin(pool(i, 0)) + pool(i, 1);
  for (Index k : {1, 7, 40}) {
    RngStream a(9), b(9);
    const auto n1 = ncoreset(pool, k, 1.0, a), n2 = ncoreset(pool, k, 1.0, b);
    CHECK(n1 == n2);
    CHECK(static_cast<Index>(std::set<Index>(n1.begin(), n1.end()).size()) == k);
    const auto c1 = acoreset(pool, labels, k, 1.0, a), c2 = acoreset(pool, labels, k, 1.0, b);
    CHECK(c1 == c2);
    CHECK(static_cast<Index>(std::set<Index>(c1.begin(), c1.end()).size()) == k);
  }
  RngStream r(1);
  CHECK_THROWS_AS(acoreset(pool, labels, 121, 1.0, r), Error);
}

TEST_CASE("ncoreset continues with the maxmin rule in the RKHS metric") {
  RngStream rng(5);
  const Points pool = rng.normal_matrix(30, 2);
  RngStream a(2), b(2);
  const auto sel = ncoreset(pool, 10, 1.5, a);
  const auto first = static_cast<Index>(b.below(30));
  CHECK(sel.front() == first);
  // The RKHS metric is a monotone function of the Euclidean one.
  CHECK(sel == naive_maxmin(pool, 10, {first}));
}

TEST_CASE("Err examples and invariances") {
  RngStream rng(6);
  const std::vector<Points> pts{rng.normal_matrix(8, 2), rng.normal_matrix(5, 2)};
  const std::vector<Vector> y{rng.normal_vector(8), rng.normal_vector(5)};
  const LabeledEnsemble e = labeled(pts, y, {0.25, 0.75});

  CHECK(err_metric(KernelModel::zero(2, 1.0), e) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(err_from_predictions(e, y) == 0.0);

  const std::vector<Vector> p{rng.normal_vector(8), rng.normal_vector(5)};
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    num += e.weights[k] * (y[k] - p[k]).squaredNorm() / static_cast<double>(y[k].size());
    den += e.weights[k] * y[k].squaredNorm() / static_cast<double>(y[k].size());
  }
  const double err = err_from_predictions(e, p);
  CHECK(rel_err(err, std::sqrt(num / den)) < 1e-14);

  // Joint scaling of labels and predictions.
  const LabeledEnsemble scaled = labeled(pts, {Vector(3.0 * y[0]), Vector(3.0 * y[1])}, {0.25, 0.75});
  CHECK(rel_err(err_from_predictions(scaled, {Vector(3.0 * p[0]), Vector(3.0 * p[1])}), err) < 1e-14);
  // Only relative weights matter.
  const LabeledEnsemble reweighted = labeled(pts, y, {1.0, 3.0});
  CHECK(rel_err(err_from_predictions(reweighted, p), err) < 1e-14);

  const LabeledEnsemble zeros = labeled(pts, {Vector::Zero(8), Vector::Zero(5)}, {0.5, 0.5});
  CHECK_THROWS_AS(err_from_predictions(zeros, p), Error);
}

TEST_CASE("meta ensemble layout") {
  RngStream a(7), b(7);
  const BenchmarkEnsemble e = make_meta_ensemble(4, 3, 95, a);
  const BenchmarkEnsemble f = make_meta_ensemble(4, 3, 95, b);
  CHECK(e.gaussians.size() == 4);
  for (Index k = 0; k < 4; ++k) {
    const auto i = static_cast<std::size_t>(k);
    CHECK(e.weights[i] == 0.25);
    CHECK(e.validation[i].size() == 10);
    CHECK(e.test[i].size() == 85);
    CHECK(e.full[i].size() == 95);
    CHECK(e.full[i].points().topRows(10) == e.validation[i].points());
    CHECK(e.full[i].points().bottomRows(85) == e.test[i].points());
    CHECK(e.gaussians.gaussian(k).mean() == f.gaussians.gaussian(k).mean());
    CHECK(e.full[i].points() == f.full[i].points());
  }
  CHECK(e.samples().all_empirical());

  RngStream c(8);
  const BenchmarkEnsemble one = make_meta_ensemble(1, 2, 1, c);
  CHECK(one.validation[0].size() == 1);
  CHECK(one.test[0].size() == 1);
}

TEST_CASE("baseline samplers") {
  RngStream rng(9);
  const Vector m0 = Vector::Constant(2, 0.5);
  const Points normal = baseline_distribution(BaselineKind::kNormal, m0)(20000, rng);
  const EmpiricalMeasure ne(normal);
  CHECK((ne.mean() - m0).norm() < 0.05);
  CHECK((ne.covariance() - Matrix::Identity(2, 2)).norm() < 0.06);

  const Points uni = baseline_distribution(BaselineKind::kUniform, m0)(1000, rng);
  CHECK(uni.minCoeff() > 0.0);
  CHECK(uni.maxCoeff() < 1.0);

  Points a = rng.normal_matrix(400, 2), b = rng.normal_matrix(400, 2);
  a.array() += 3.0;
  b.array() -= 1.0;
  const std::vector<EmpiricalMeasure> atoms{EmpiricalMeasure(a), EmpiricalMeasure(b)};
  const Vector mid = 0.5 * (atoms[0].mean() + atoms[1].mean());
  const EmpiricalMeasure mix(baseline_distribution(BaselineKind::kMixture, m0, atoms)(20000, rng));
  CHECK((mix.mean() - mid).norm() < 0.1);
  const EmpiricalMeasure bar(baseline_distribution(BaselineKind::kBarycenter, m0, atoms)(20000, rng));
  CHECK((bar.mean() - mid).norm() < 0.05);
  // The barycenter keeps the atom spread; the mixture adds the spread of the means.
  CHECK(bar.covariance().trace() < 3.0);
  CHECK(mix.covariance().trace() > 8.0);

  CHECK_THROWS_AS(baseline_distribution(BaselineKind::kMixture, m0), Error);
  CHECK_THROWS_AS(baseline_from_name("nope"), Error);
  CHECK(baseline_name(baseline_from_name("barycenter")) == "barycenter");
}

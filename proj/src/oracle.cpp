#include "ood/oracle.hpp"

namespace ood {

Vector ScalarOracle::evaluate(const Points& x) const {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = value(x.row(i).transpose());
  return out;
}

Vector oracle_gradient(const ScalarOracle& oracle, const Vector& u) {
  if (oracle.has_gradient()) return oracle.gradient(u);
  const double h = 1e-4 * (1.0 + u.norm());
  Vector grad(u.size());
  Vector probe = u;
  for (Index i = 0; i < u.size(); ++i) {
    probe(i) = u(i) + h;
    const double up = oracle.value(probe);
    probe(i) = u(i) - h;
    const double down = oracle.value(probe);
    probe(i) = u(i);
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

ScalarOracle zero_oracle() {
  return {[](const Vector&) { return 0.0; },
          [](const Vector& x) { return Vector::Zero(x.size()).eval(); }};
}

LabeledEnsemble label_atoms(std::vector<EmpiricalMeasure> atoms, std::vector<double> weights,
                            const ScalarOracle& oracle) {
  LabeledEnsemble out;
  if (weights.empty())
    weights.assign(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
  out.labels.reserve(atoms.size());
  for (const auto& a : atoms) out.labels.push_back(oracle.evaluate(a.points()));
  out.atoms = std::move(atoms);
  out.weights = std::move(weights);
  out.validate();
  return out;
}

}  // namespace ood

#pragma once

#include "ood/measures.hpp"

#include <functional>

namespace ood {

/// Query access to a scalar target map, optionally with its gradient.
struct ScalarOracle {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;

  double operator()(const Vector& x) const { return value(x); }
  Vector evaluate(const Points& x) const;
  bool has_gradient() const { return static_cast<bool>(gradient); }
};

/// Analytic gradient when available, else central differences with step
/// 1e-4 (1 + |u|).
Vector oracle_gradient(const ScalarOracle& oracle, const Vector& u);

ScalarOracle zero_oracle();

/// Labels every point of every atom with the oracle.
LabeledEnsemble label_atoms(std::vector<EmpiricalMeasure> atoms, std::vector<double> weights,
                            const ScalarOracle& oracle);

}  // namespace ood

#pragma once

#include "ood/measures.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ood {

/// One row of an optimization history. Parameters are the Gaussian iterate
/// (or the moment summary of a particle iterate).
struct TraceRecord {
  Index iter = 0;
  double objective = 0.0;
  double err_seen = 0.0;
  double err_unseen = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
  Vector mean;
  Matrix cov_factor;

  // Not part of the CSV layout.
  double objective_stderr = 0.0;
  double step_size = 0.0;
  std::string phase;
};

struct OptimizationTrace {
  std::vector<TraceRecord> records;
  /// "completed", "converged" or "aborted: <reason>".
  std::string status = "completed";
  std::optional<GaussianMeasure> final_gaussian;
  std::optional<EmpiricalMeasure> final_particles;

  /// Records after the initial evaluation.
  Index completed_iterations() const {
    return records.empty() ? 0 : static_cast<Index>(records.size()) - 1;
  }
  bool aborted() const { return status.rfind("aborted", 0) == 0; }
};

/// Header "iter,objective,err_seen,err_unseen,grad_norm,wall_ms" followed by
/// m_i columns and L_i_j columns (lower triangle, row-major).
std::string trace_csv_header(Index dim);
/// Wall times are written as 0 unless requested so that reruns are byte-identical.
void write_trace_csv(std::ostream& os, const OptimizationTrace& trace, bool wall_time = false);
std::vector<TraceRecord> read_trace_csv(std::istream& is);

/// Formats with round-trip precision; NaN is written as "nan".
std::string format_double(double x);

/// Lower-triangular factor summarizing a sample covariance (robust to rank
/// deficiency, diagonal floored at kDiagFloor).
Matrix summary_factor(const Matrix& covariance);

}  // namespace ood

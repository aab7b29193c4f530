#pragma once

#include "ood/types.hpp"

#include <vector>

namespace ood {

struct Assignment {
  /// column matched to each row
  std::vector<Index> row_to_col;
  double total_cost = 0.0;
};

/// Exact minimum-cost perfect matching on a square cost matrix
/// (shortest augmenting path Hungarian method, O(n^3)).
Assignment solve_assignment(const Matrix& cost);

}  // namespace ood

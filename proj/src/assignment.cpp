#include "ood/assignment.hpp"

#include <algorithm>
#include <limits>

namespace ood {

Assignment solve_assignment(const Matrix& cost) {
  require(cost.rows() == cost.cols(), ErrorCode::kUnsupportedConfiguration,
          "assignment needs a square cost matrix");
  require(cost.allFinite(), ErrorCode::kNonFinite, "assignment cost must be finite");
  const Index n = cost.rows();
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c = cost;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> col_owner(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> way(static_cast<std::size_t>(n + 1), 0);
  std::vector<double> minv(static_cast<std::size_t>(n + 1));
  std::vector<char> used(static_cast<std::size_t>(n + 1));

  for (Index row = 1; row <= n; ++row) {
    col_owner[0] = row;
    Index j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = col_owner[static_cast<std::size_t>(j0)];
      double delta = kInf;
      Index j1 = 0;
      const double* cost_row = c.data() + (i0 - 1) * n;
      const double u_i0 = u[static_cast<std::size_t>(i0)];
      for (Index j = 1; j <= n; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) continue;
        const double reduced = cost_row[j - 1] - u_i0 - v[ju];
        if (reduced < minv[ju]) {
          minv[ju] = reduced;
          way[ju] = j0;
        }
        if (minv[ju] < delta) {
          delta = minv[ju];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) {
          u[static_cast<std::size_t>(col_owner[ju])] += delta;
          v[ju] -= delta;
        } else {
          minv[ju] -= delta;
        }
      }
      j0 = j1;
    } while (col_owner[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      col_owner[static_cast<std::size_t>(j0)] = col_owner[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment result;
  result.row_to_col.assign(static_cast<std::size_t>(n), 0);
  for (Index j = 1; j <= n; ++j)
    result.row_to_col[static_cast<std::size_t>(col_owner[static_cast<std::size_t>(j)] - 1)] = j - 1;
  for (Index i = 0; i < n; ++i)
    result.total_cost += cost(i, result.row_to_col[static_cast<std::size_t>(i)]);
  return result;
}

}  // namespace ood

#include "ood/trace.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace ood {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::kInvalidArgument,
          "malformed number in trace");
  return x;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

std::string trace_csv_header(Index dim) {
  std::string h = "iter,objective,err_seen,err_unseen,grad_norm,wall_ms";
  for (Index i = 0; i < dim; ++i) h += ",m_" + std::to_string(i);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j <= i; ++j) h += ",L_" + std::to_string(i) + "_" + std::to_string(j);
  return h;
}

void write_trace_csv(std::ostream& os, const OptimizationTrace& trace, bool wall_time) {
  const Index dim = trace.records.empty() ? 0 : trace.records.front().mean.size();
  os << trace_csv_header(dim) << '\n';
  for (const auto& r : trace.records) {
    os << r.iter << ',' << format_double(r.objective) << ',' << format_double(r.err_seen) << ','
       << format_double(r.err_unseen) << ',' << format_double(r.grad_norm) << ','
       << format_double(wall_time ? r.wall_ms : 0.0);
    for (Index i = 0; i < dim; ++i) os << ',' << format_double(r.mean(i));
    for (Index i = 0; i < dim; ++i)
      for (Index j = 0; j <= i; ++j) os << ',' << format_double(r.cov_factor(i, j));
    os << '\n';
  }
}

std::vector<TraceRecord> read_trace_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::kInvalidArgument,
          "trace is empty");
  const auto header = split_csv(line);
  require(header.size() >= 6, ErrorCode::kInvalidArgument, "trace header too short");
  // Solve dim + dim(dim+1)/2 = extra columns.
  const auto extra = static_cast<Index>(header.size()) - 6;
  Index dim = 0;
  while (dim + dim * (dim + 1) / 2 < extra) ++dim;
  require(dim + dim * (dim + 1) / 2 == extra, ErrorCode::kInvalidArgument,
          "trace parameter columns malformed");

  std::vector<TraceRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    require(cells.size() == header.size(), ErrorCode::kInvalidArgument, "trace row width");
    TraceRecord r;
    r.iter = static_cast<Index>(std::stoll(cells[0]));
    r.objective = parse_double(cells[1]);
    r.err_seen = parse_double(cells[2]);
    r.err_unseen = parse_double(cells[3]);
    r.grad_norm = parse_double(cells[4]);
    r.wall_ms = parse_double(cells[5]);
    r.mean.resize(dim);
    r.cov_factor = Matrix::Zero(dim, dim);
    std::size_t c = 6;
    for (Index i = 0; i < dim; ++i) r.mean(i) = parse_double(cells[c++]);
    for (Index i = 0; i < dim; ++i)
      for (Index j = 0; j <= i; ++j) r.cov_factor(i, j) = parse_double(cells[c++]);
    out.push_back(std::move(r));
  }
  return out;
}

Matrix summary_factor(const Matrix& covariance) {
  const Index d = covariance.rows();
  Matrix sym = 0.5 * (covariance + covariance.transpose());
  Eigen::LLT<Matrix> llt(sym + 1e-14 * (1.0 + sym.trace()) * Matrix::Identity(d, d));
  Matrix factor = Matrix::Zero(d, d);
  if (llt.info() == Eigen::Success) factor = llt.matrixL();
  for (Index i = 0; i < d; ++i) factor(i, i) = std::max(factor(i, i), kDiagFloor);
  return factor;
}

}  // namespace ood

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ood {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Point sets are stored one point per row.
using Points = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kInvalidMatrix,
  kInvalidDegreesOfFreedom,
  kUnsupportedConfiguration,
  kNoConvergence,
  kSingularKernelMatrix,
  kDegeneratePair,
  kDegenerateTarget,
  kExhaustedPool,
  kNonFinite,
  kConfig,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const char* what) {
  if (!cond) throw Error(code, what);
}

}  // namespace ood

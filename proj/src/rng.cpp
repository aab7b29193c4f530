#include "ood/rng.hpp"

#include <cmath>
#include <numbers>

namespace ood {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kInvalidMatrix: return "invalid-matrix";
    case ErrorCode::kInvalidDegreesOfFreedom: return "invalid-degrees-of-freedom";
    case ErrorCode::kUnsupportedConfiguration: return "unsupported-configuration";
    case ErrorCode::kNoConvergence: return "no-convergence";
    case ErrorCode::kSingularKernelMatrix: return "singular-kernel-matrix";
    case ErrorCode::kDegeneratePair: return "degenerate-pair";
    case ErrorCode::kDegenerateTarget: return "degenerate-target";
    case ErrorCode::kExhaustedPool: return "exhausted-pool";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kConfig: return "config-error";
  }
  return "unknown";
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed + kGolden) ^ (stream * kGolden + 0x632be59bd9b4e019ULL))) {}

RngStream RngStream::split(std::uint64_t id) const {
  RngStream child(0);
  child.key_ = mix64(key_ ^ mix64(id + 0xd1b54a32d192ed03ULL));
  return child;
}

RngStream::result_type RngStream::operator()() {
  return mix64(key_ ^ mix64(counter_++ * kGolden));
}

double RngStream::uniform() {
  // 53 random bits, shifted by half an ulp so that 0 is never returned.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector RngStream::normal_vector(Index n) {
  Vector z(n);
  for (Index i = 0; i < n; ++i) z(i) = normal();
  return z;
}

Matrix RngStream::normal_matrix(Index rows, Index cols) {
  Matrix z(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) z(i, j) = normal();
  return z;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) return 0;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return x % n;
}

}  // namespace ood

#pragma once

#include "ood/types.hpp"

#include <cstdint>
#include <limits>

namespace ood {

/// Counter-based random stream. The output at position n is a pure function of
/// (key, n), so streams are reproducible and can be split without sharing state.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t stream = 0);

  /// Independent child stream; does not advance this stream.
  RngStream split(std::uint64_t id) const;

  result_type operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal (Box-Muller, no cached second variate).
  double normal();
  Vector normal_vector(Index n);
  Matrix normal_matrix(Index rows, Index cols);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ood

#pragma once

#include "ood/ama.hpp"
#include "ood/bilevel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ood {

/// Experiment description read from a sectioned key = value file:
///
///   [experiment]  target, dim, target_seed, seed, replicates, out, train_samples,
///                 lengthscale, threads
///   [ensemble]    K, M, seed
///   [bilevel]     iterations, lr_initial, lr_final, nugget_initial, nugget_final,
///                 samples_per_step, normalize_gradient, trust_region, eval_every,
///                 mean_only, compare
///   [ama]         R, lip_target, outer_iterations, samples_for_misfit, w2_mc_samples,
///                 gradient_samples, fit_samples, step_size, step_halving, max_halvings,
///                 tol_step, form, mean_only, probe_count, probe_pairs, particles
///   [baselines]   kinds
///   [eval]        model, trace
///   [sweep]       sizes, distributions
struct ExperimentConfig {
  std::string target = "g1";
  Index dim = 2;
  std::uint64_t target_seed = 0;
  std::uint64_t seed = 0;
  Index replicates = 1;
  std::string out = "out";
  Index train_samples = 1024;
  std::optional<double> lengthscale;  // defaults per target
  Index threads = 1;

  Index ensemble_k = 10;
  Index ensemble_m = 5000;
  std::optional<std::uint64_t> ensemble_seed;  // defaults to seed

  BilevelConfig bilevel;
  std::vector<std::string> bilevel_compare{"normal"};

  AmaConfig ama;
  /// Particle count for the particle family; atoms are subsampled to match.
  Index particles = 200;

  std::vector<std::string> baselines{"normal", "barycenter", "mixture", "uniform", "ncoreset",
                                     "acoreset"};

  /// "zero", a baseline name, or "trace" (final parameters of eval_trace).
  std::string eval_model = "zero";
  std::string eval_trace;

  std::vector<Index> sweep_sizes{64, 128, 256, 512, 1024};
  std::vector<std::string> sweep_distributions{"optimized", "normal"};

  /// Raw text the config was parsed from, for hashing.
  std::string source;

  double kernel_lengthscale() const;
  std::uint64_t ensemble_seed_value() const { return ensemble_seed.value_or(seed); }
  void validate() const;
};

/// Throws Error(kConfig) naming the offending field as section.key.
ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// 64-bit FNV-1a, used for the manifest config hash.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace ood

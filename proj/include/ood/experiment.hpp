#pragma once

#include "ood/benchmarks.hpp"
#include "ood/config.hpp"
#include "ood/trace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ood {

enum class Subcommand { kBilevel, kAmaGaussian, kAmaParticles, kBaselines, kEval, kSweep };

Subcommand subcommand_from_name(const std::string& name);
std::string subcommand_name(Subcommand sub);

/// Err of one trained model.
struct ErrRow {
  std::string distribution;
  Index train_samples = 0;
  /// Labels consumed including any spent while optimizing the distribution.
  Index cost_samples = 0;
  double err = 0.0;
};

struct ReplicateResult {
  Index index = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  std::vector<ErrRow> rows;
  std::optional<OptimizationTrace> trace;

  bool ok() const { return status == "ok"; }
};

struct SummaryRow {
  std::string distribution;
  std::string metric;  // "err", "final_err_unseen" or "final_objective"
  Index train_samples = 0;
  Index cost_samples = 0;
  double mean = 0.0;
  double two_sigma = 0.0;
  Index count = 0;
};

struct ExperimentResult {
  Subcommand subcommand;
  std::vector<ReplicateResult> replicates;
  std::vector<SummaryRow> summary;
  std::vector<std::string> warnings;

  bool all_ok() const;
};

/// Shared, read-only inputs of every replicate.
struct ExperimentContext {
  TargetFunction target;
  BenchmarkEnsemble ensemble;
  LabeledSplit split;
  double lengthscale;
  Vector initial_mean;

  static ExperimentContext build(const ExperimentConfig& config);
};

/// Sample mean and two sample standard deviations (0 for a single value).
std::pair<double, double> mean_two_sigma(const std::vector<double>& values);

/// Trains a ridge model on n labeled draws (nugget 1e-3 / n) and returns Err
/// on the test split.
double train_and_score(const ExperimentContext& ctx, const Sampler& sampler, Index n,
                       RngStream& rng);

/// Err of a model trained on n points of a baseline or coreset distribution.
double score_distribution(const ExperimentContext& ctx, const std::string& name, Index n,
                          RngStream& rng);

ReplicateResult run_replicate(Subcommand sub, const ExperimentConfig& config,
                              const ExperimentContext& ctx, Index replicate);

/// Runs all replicates (in parallel when config.threads > 1) and aggregates.
ExperimentResult run_experiment(Subcommand sub, const ExperimentConfig& config);

std::vector<SummaryRow> summarize(const std::vector<ReplicateResult>& replicates);

/// Writes trace_rep<i>.csv, results.csv, summary.csv and manifest.json.
void write_artifacts(const ExperimentConfig& config, const ExperimentResult& result,
                     const std::string& out_dir);

/// Reads results.csv rows back as (replicate, row) pairs.
std::vector<std::pair<Index, ErrRow>> read_results_csv(const std::string& path);

std::string trace_file_name(Index replicate);

}  // namespace ood

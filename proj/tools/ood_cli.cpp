// Batch driver: ood <subcommand> --config FILE [--seed S] [--replicates N] [--out DIR] [--threads T]
#include "ood/config.hpp"
#include "ood/experiment.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<ood::Index> replicates;
  std::optional<std::string> out;
  std::optional<ood::Index> threads;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "experiment config (INI)")->required();
  sub->add_option("--seed", f.seed, "base seed; replicate r uses seed + r");
  sub->add_option("--replicates", f.replicates, "number of replicates");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--threads", f.threads, "replicates run concurrently");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-distribution design for out-of-distribution regression"};
  app.require_subcommand(1);
  Flags flags;
  for (const char* name :
       {"bilevel", "ama-gaussian", "ama-particles", "baselines", "eval", "sweep"})
    add_flags(app.add_subcommand(name), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }
  const std::string sub_name = app.get_subcommands().front()->get_name();

  ood::ExperimentConfig config;
  try {
    config = ood::load_config(flags.config);
    if (flags.seed) config.seed = *flags.seed;
    if (flags.replicates) config.replicates = *flags.replicates;
    if (flags.out) config.out = *flags.out;
    if (flags.threads) config.threads = *flags.threads;
    config.validate();
  } catch (const ood::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    const ood::Subcommand sub = ood::subcommand_from_name(sub_name);
    const ood::ExperimentResult result = ood::run_experiment(sub, config);
    ood::write_artifacts(config, result, config.out);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& row : result.summary)
      std::cout << row.distribution << ' ' << row.metric << " N=" << row.train_samples
                << " mean=" << row.mean << " +/- " << row.two_sigma << '\n';
    if (!result.all_ok()) {
      for (const auto& r : result.replicates)
        if (!r.ok()) std::cerr << "replicate " << r.index << ": " << r.status << '\n';
      return kRuntimeError;
    }
  } catch (const ood::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ood::ErrorCode::kConfig ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}

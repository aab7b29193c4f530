#include "ood/experiment.hpp"

#include "ood/ama.hpp"
#include "ood/bilevel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

namespace ood {
namespace {

constexpr const char* kVersion = "0.1.0";

struct Pool {
  Points points;
  Vector labels;
};

Pool validation_pool(const ExperimentContext& ctx) {
  const auto& v = ctx.split.validation;
  Pool pool;
  pool.points.resize(v.total_points(), v.dim());
  pool.labels.resize(v.total_points());
  Index row = 0;
  for (std::size_t k = 0; k < v.atoms.size(); ++k) {
    const Index n = v.atoms[k].size();
    pool.points.middleRows(row, n) = v.atoms[k].points();
    pool.labels.segment(row, n) = v.labels[k];
    row += n;
  }
  return pool;
}

double score_points(const ExperimentContext& ctx, const Points& x, const Vector& y) {
  const KernelModel model =
      fit_krr(x, y, ctx.lengthscale, 1e-3 / static_cast<double>(x.rows()));
  return err_metric(model, ctx.split.test);
}

Sampler particle_sampler(const EmpiricalMeasure& particles) {
  return [particles](Index n, RngStream& rng) {
    return sample_atom(Atom(particles), n, rng);
  };
}

std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

// Atoms for the particle family: the first `count` validation points of each atom.
MetaTestEnsemble particle_atoms(const ExperimentContext& ctx, Index count) {
  std::vector<Atom> atoms;
  for (const auto& a : ctx.ensemble.validation) {
    require(a.size() >= count, ErrorCode::kInvalidArgument,
            "ama.particles exceeds the validation points per atom");
    atoms.emplace_back(EmpiricalMeasure(a.points().topRows(count)));
  }
  return MetaTestEnsemble(std::move(atoms), ctx.ensemble.weights);
}

void run_bilevel_replicate(const ExperimentConfig& config, const ExperimentContext& ctx,
                           ReplicateResult& res, RngStream& rng, bool compare) {
  BilevelConfig b = config.bilevel;
  b.seed = res.seed;
  b.lengthscale = ctx.lengthscale;
  const GaussianMeasure theta0(ctx.initial_mean,
                               Matrix::Identity(ctx.initial_mean.size(), ctx.initial_mean.size()));
  res.trace = run_bilevel(b, ctx.target.oracle(), ctx.split.validation, ctx.split.test, theta0);
  if (res.trace->aborted()) {
    res.status = "failed: " + res.trace->status;
    return;
  }
  if (!compare) return;
  const Index n = config.train_samples;
  const Index cost = n + b.iterations * b.samples_per_step;
  res.rows.push_back({"optimized", n, cost,
                      train_and_score(ctx, gaussian_sampler(*res.trace->final_gaussian), n, rng)});
  for (const auto& name : config.bilevel_compare)
    res.rows.push_back({name, n, n, score_distribution(ctx, name, n, rng)});
}

void run_ama_replicate(Subcommand sub, const ExperimentConfig& config,
                       const ExperimentContext& ctx, ReplicateResult& res, RngStream& rng) {
  AmaConfig a = config.ama;
  a.seed = res.seed;
  a.lengthscale = ctx.lengthscale;
  const Index d = ctx.initial_mean.size();
  const GaussianMeasure nu0(ctx.initial_mean, Matrix::Identity(d, d));
  const Index n = config.train_samples;
  if (sub == Subcommand::kAmaGaussian) {
    res.trace = ama_loop(a, AmaFamily::kGaussian, ctx.target.oracle(), ctx.ensemble.gaussians,
                         nu0, &ctx.split);
  } else {
    const MetaTestEnsemble q = particle_atoms(ctx, config.particles);
    RngStream init = rng.split(7);
    const EmpiricalMeasure p0 = sample_gaussian(nu0, config.particles, init);
    res.trace = ama_loop(a, AmaFamily::kParticles, ctx.target.oracle(), q, p0, &ctx.split);
  }
  if (res.trace->aborted()) {
    res.status = "failed: " + res.trace->status;
    return;
  }
  const Sampler s = res.trace->final_gaussian ? gaussian_sampler(*res.trace->final_gaussian)
                                              : particle_sampler(*res.trace->final_particles);
  res.rows.push_back({"optimized", n, n, train_and_score(ctx, s, n, rng)});
  res.rows.push_back({"normal", n, n, score_distribution(ctx, "normal", n, rng)});
}

void run_eval_replicate(const ExperimentConfig& config, const ExperimentContext& ctx,
                        ReplicateResult& res, RngStream& rng) {
  const Index n = config.train_samples;
  if (config.eval_model == "zero") {
    const KernelModel zero = KernelModel::zero(ctx.initial_mean.size(), ctx.lengthscale);
    res.rows.push_back({"zero", 0, 0, err_metric(zero, ctx.split.test)});
  } else if (config.eval_model == "trace") {
    std::ifstream in(config.eval_trace);
    require(static_cast<bool>(in), ErrorCode::kInvalidArgument, "cannot read eval.trace");
    const auto records = read_trace_csv(in);
    require(!records.empty(), ErrorCode::kInvalidArgument, "eval.trace has no records");
    const GaussianMeasure g(records.back().mean, project_psd(records.back().cov_factor));
    res.rows.push_back({"trace", n, n, train_and_score(ctx, gaussian_sampler(g), n, rng)});
  } else {
    res.rows.push_back({config.eval_model, n, n,
                        score_distribution(ctx, config.eval_model, n, rng)});
  }
}

void run_sweep_replicate(const ExperimentConfig& config, const ExperimentContext& ctx,
                         ReplicateResult& res, RngStream& rng) {
  const auto& dists = config.sweep_distributions;
  const bool optimized = std::find(dists.begin(), dists.end(), "optimized") != dists.end();
  if (optimized) {
    run_bilevel_replicate(config, ctx, res, rng, false);
    if (!res.ok()) return;
  }
  const Index spent = config.bilevel.iterations * config.bilevel.samples_per_step;
  for (const auto& name : dists) {
    for (Index n : config.sweep_sizes) {
      RngStream cell = rng.split(0x5000 + static_cast<std::uint64_t>(n));
      if (name == "optimized") {
        res.rows.push_back({name, n, n + spent,
                            train_and_score(ctx, gaussian_sampler(*res.trace->final_gaussian),
                                            n, cell)});
      } else {
        res.rows.push_back({name, n, n, score_distribution(ctx, name, n, cell)});
      }
    }
  }
}

void write_results(std::ostream& os, const std::vector<ReplicateResult>& reps) {
  os << "replicate,seed,distribution,train_samples,cost_samples,err,status\n";
  for (const auto& r : reps) {
    if (r.rows.empty()) {
      os << r.index << ',' << r.seed << ",,0,0,nan," << std::quoted(r.status) << '\n';
      continue;
    }
    for (const auto& row : r.rows)
      os << r.index << ',' << r.seed << ',' << row.distribution << ',' << row.train_samples
         << ',' << row.cost_samples << ',' << format_double(row.err) << ','
         << std::quoted(r.status) << '\n';
  }
}

void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "distribution,metric,train_samples,cost_samples,mean,two_sigma,count\n";
  for (const auto& s : rows)
    os << s.distribution << ',' << s.metric << ',' << s.train_samples << ',' << s.cost_samples
       << ',' << format_double(s.mean) << ',' << format_double(s.two_sigma) << ',' << s.count
       << '\n';
}

}  // namespace

Subcommand subcommand_from_name(const std::string& name) {
  if (name == "bilevel") return Subcommand::kBilevel;
  if (name == "ama-gaussian") return Subcommand::kAmaGaussian;
  if (name == "ama-particles") return Subcommand::kAmaParticles;
  if (name == "baselines") return Subcommand::kBaselines;
  if (name == "eval") return Subcommand::kEval;
  if (name == "sweep") return Subcommand::kSweep;
  throw Error(ErrorCode::kConfig, "unknown subcommand '" + name + "'");
}

std::string subcommand_name(Subcommand sub) {
  switch (sub) {
    case Subcommand::kBilevel: return "bilevel";
    case Subcommand::kAmaGaussian: return "ama-gaussian";
    case Subcommand::kAmaParticles: return "ama-particles";
    case Subcommand::kBaselines: return "baselines";
    case Subcommand::kEval: return "eval";
    case Subcommand::kSweep: return "sweep";
  }
  return "?";
}

bool ExperimentResult::all_ok() const {
  return std::all_of(replicates.begin(), replicates.end(),
                     [](const ReplicateResult& r) { return r.ok(); });
}

ExperimentContext ExperimentContext::build(const ExperimentConfig& config) {
  TargetFunction target = TargetFunction::from_id(config.target, config.dim, config.target_seed);
  RngStream rng(config.ensemble_seed_value(), 0x656e73);
  BenchmarkEnsemble ensemble =
      make_meta_ensemble(config.ensemble_k, config.dim, config.ensemble_m, rng);
  LabeledSplit split = label_split(ensemble, target.oracle());
  const double ell = config.kernel_lengthscale();
  Vector m0 = target.default_initial_mean();
  return ExperimentContext{std::move(target), std::move(ensemble), std::move(split), ell,
                           std::move(m0)};
}

std::pair<double, double> mean_two_sigma(const std::vector<double>& values) {
  if (values.empty()) return {std::nan(""), std::nan("")};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, 2.0 * std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

double train_and_score(const ExperimentContext& ctx, const Sampler& sampler, Index n,
                       RngStream& rng) {
  const Points x = sampler(n, rng);
  return score_points(ctx, x, ctx.target.oracle().evaluate(x));
}

double score_distribution(const ExperimentContext& ctx, const std::string& name, Index n,
                          RngStream& rng) {
  if (name == "ncoreset" || name == "acoreset") {
    const Pool pool = validation_pool(ctx);
    const std::vector<Index> idx =
        name == "ncoreset" ? ncoreset(pool.points, n, ctx.lengthscale, rng)
                           : acoreset(pool.points, pool.labels, n, ctx.lengthscale, rng);
    Points x(static_cast<Index>(idx.size()), pool.points.cols());
    Vector y(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      x.row(static_cast<Index>(i)) = pool.points.row(idx[i]);
      y(static_cast<Index>(i)) = pool.labels(idx[i]);
    }
    return score_points(ctx, x, y);
  }
  const Sampler s =
      baseline_distribution(baseline_from_name(name), ctx.initial_mean, ctx.ensemble.full);
  return train_and_score(ctx, s, n, rng);
}

ReplicateResult run_replicate(Subcommand sub, const ExperimentConfig& config,
                              const ExperimentContext& ctx, Index replicate) {
  ReplicateResult res;
  res.index = replicate;
  res.seed = config.seed + static_cast<std::uint64_t>(replicate);
  RngStream rng(res.seed, 0x726570);
  try {
    switch (sub) {
      case Subcommand::kBilevel:
        run_bilevel_replicate(config, ctx, res, rng, true);
        break;
      case Subcommand::kAmaGaussian:
      case Subcommand::kAmaParticles:
        run_ama_replicate(sub, config, ctx, res, rng);
        break;
      case Subcommand::kBaselines:
        for (const auto& name : config.baselines) {
          RngStream cell = rng.split(fnv1a64(name));
          res.rows.push_back({name, config.train_samples, config.train_samples,
                              score_distribution(ctx, name, config.train_samples, cell)});
        }
        break;
      case Subcommand::kEval:
        run_eval_replicate(config, ctx, res, rng);
        break;
      case Subcommand::kSweep:
        run_sweep_replicate(config, ctx, res, rng);
        break;
    }
  } catch (const std::exception& e) {
    res.status = std::string("failed: ") + e.what();
  }
  return res;
}

std::vector<SummaryRow> summarize(const std::vector<ReplicateResult>& replicates) {
  // Keyed by first appearance so row order follows the config.
  std::vector<std::tuple<std::string, Index, Index>> keys;
  std::map<std::tuple<std::string, Index, Index>, std::vector<double>> values;
  for (const auto& r : replicates) {
    if (!r.ok()) continue;
    for (const auto& row : r.rows) {
      auto key = std::make_tuple(row.distribution, row.train_samples, row.cost_samples);
      if (!values.count(key)) keys.push_back(key);
      values[key].push_back(row.err);
    }
  }
  std::vector<SummaryRow> out;
  for (const auto& key : keys) {
    const auto& v = values[key];
    const auto [mean, two_sigma] = mean_two_sigma(v);
    out.push_back({std::get<0>(key), "err", std::get<1>(key), std::get<2>(key), mean, two_sigma,
                   static_cast<Index>(v.size())});
  }

  std::vector<double> final_err, final_obj;
  for (const auto& r : replicates) {
    if (!r.ok() || !r.trace || r.trace->records.empty()) continue;
    final_err.push_back(r.trace->records.back().err_unseen);
    final_obj.push_back(r.trace->records.back().objective);
  }
  if (!final_err.empty()) {
    const auto [me, se] = mean_two_sigma(final_err);
    out.push_back({"trace", "final_err_unseen", 0, 0, me, se,
                   static_cast<Index>(final_err.size())});
    const auto [mo, so] = mean_two_sigma(final_obj);
    out.push_back({"trace", "final_objective", 0, 0, mo, so,
                   static_cast<Index>(final_obj.size())});
  }
  return out;
}

ExperimentResult run_experiment(Subcommand sub, const ExperimentConfig& config) {
  config.validate();
  const ExperimentContext ctx = ExperimentContext::build(config);

  ExperimentResult result;
  result.subcommand = sub;
  result.replicates.resize(static_cast<std::size_t>(config.replicates));
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index r = next++; r < config.replicates; r = next++)
      result.replicates[static_cast<std::size_t>(r)] = run_replicate(sub, config, ctx, r);
  };
  const Index n_threads = std::min(config.threads, config.replicates);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (Index t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  result.summary = summarize(result.replicates);

  if (sub == Subcommand::kSweep) {
    for (const auto& s : result.summary) {
      if (s.distribution != "optimized" || s.metric != "err") continue;
      for (const auto& t : result.summary)
        if (t.distribution == "optimized" && t.metric == "err" &&
            t.train_samples > s.train_samples && t.mean > s.mean)
          result.warnings.push_back("optimized Err increases from N=" +
                                    std::to_string(s.train_samples) + " to N=" +
                                    std::to_string(t.train_samples));
    }
  }
  return result;
}

std::string trace_file_name(Index replicate) {
  return "trace_rep" + std::to_string(replicate) + ".csv";
}

void write_artifacts(const ExperimentConfig& config, const ExperimentResult& result,
                     const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  nlohmann::ordered_json reps = nlohmann::ordered_json::array();
  for (const auto& r : result.replicates) {
    nlohmann::ordered_json entry{{"index", r.index}, {"seed", r.seed}, {"status", r.status}};
    if (r.trace) {
      const std::string name = trace_file_name(r.index);
      std::ofstream os(dir / name, std::ios::binary);
      write_trace_csv(os, *r.trace);
      entry["trace"] = name;
      entry["trace_status"] = r.trace->status;
      entry["completed_iterations"] = r.trace->completed_iterations();
      files.push_back(name);
    }
    reps.push_back(std::move(entry));
  }
  {
    std::ofstream os(dir / "results.csv", std::ios::binary);
    write_results(os, result.replicates);
    files.push_back("results.csv");
  }
  {
    std::ofstream os(dir / "summary.csv", std::ios::binary);
    write_summary(os, result.summary);
    files.push_back("summary.csv");
  }
  files.push_back("manifest.json");

  nlohmann::ordered_json manifest{
      {"tool", "ood"},
      {"version", kVersion},
      {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                            std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
      {"subcommand", subcommand_name(result.subcommand)},
      {"config_hash", "fnv1a64:" + hex64(fnv1a64(config.source))},
      {"target", config.target},
      {"dim", config.dim},
      {"base_seed", config.seed},
      {"ensemble_seed", config.ensemble_seed_value()},
      {"replicates", reps},
      {"warnings", result.warnings},
      {"files", files},
  };
  std::ofstream os(dir / "manifest.json", std::ios::binary);
  os << manifest.dump(2) << '\n';
}

std::vector<std::pair<Index, ErrRow>> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kInvalidArgument, "cannot read results file");
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<Index, ErrRow>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i < 6 && std::getline(ss, cell, ','); ++i) cells.push_back(cell);
    if (cells.size() < 6 || cells[2].empty()) continue;
    ErrRow row;
    row.distribution = cells[2];
    row.train_samples = std::stoll(cells[3]);
    row.cost_samples = std::stoll(cells[4]);
    row.err = std::stod(cells[5]);
    out.emplace_back(std::stoll(cells[0]), row);
  }
  return out;
}

}  // namespace ood

#include "ood/config.hpp"

#include "ood/benchmarks.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ood {
namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kConfig, field + ": " + what);
}

template <class T>
T parse_integer(const std::string& field, const std::string& v) {
  T x{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
    bad(field, "expected an integer, got '" + v + "'");
  return x;
}

double parse_real(const std::string& field, const std::string& v) {
  double x = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
    bad(field, "expected a number, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(field, "expected a boolean, got '" + v + "'");
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

#define OOD_INT(path, member)                                                   \
  {                                                                             \
    path, [](ExperimentConfig& c, const std::string& v) {                       \
      c.member = parse_integer<Index>(path, v);                                 \
    }                                                                           \
  }
#define OOD_SEED(path, member)                                                  \
  {                                                                             \
    path, [](ExperimentConfig& c, const std::string& v) {                       \
      c.member = parse_integer<std::uint64_t>(path, v);                         \
    }                                                                           \
  }
#define OOD_REAL(path, member)                                                  \
  {                                                                             \
    path, [](ExperimentConfig& c, const std::string& v) { c.member = parse_real(path, v); } \
  }
#define OOD_BOOL(path, member)                                                  \
  {                                                                             \
    path, [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(path, v); } \
  }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"experiment.target", [](ExperimentConfig& c, const std::string& v) { c.target = v; }},
      OOD_INT("experiment.dim", dim),
      OOD_SEED("experiment.target_seed", target_seed),
      OOD_SEED("experiment.seed", seed),
      OOD_INT("experiment.replicates", replicates),
      {"experiment.out", [](ExperimentConfig& c, const std::string& v) { c.out = v; }},
      OOD_INT("experiment.train_samples", train_samples),
      OOD_REAL("experiment.lengthscale", lengthscale),
      OOD_INT("experiment.threads", threads),

      OOD_INT("ensemble.K", ensemble_k),
      OOD_INT("ensemble.M", ensemble_m),
      OOD_SEED("ensemble.seed", ensemble_seed),

      OOD_INT("bilevel.iterations", bilevel.iterations),
      OOD_REAL("bilevel.lr_initial", bilevel.lr.initial),
      OOD_REAL("bilevel.lr_final", bilevel.lr.final_value),
      OOD_REAL("bilevel.nugget_initial", bilevel.nugget.initial),
      OOD_REAL("bilevel.nugget_final", bilevel.nugget.final_value),
      OOD_INT("bilevel.samples_per_step", bilevel.samples_per_step),
      OOD_BOOL("bilevel.normalize_gradient", bilevel.normalize_gradient),
      OOD_BOOL("bilevel.trust_region", bilevel.trust_region),
      OOD_INT("bilevel.eval_every", bilevel.eval_every),
      OOD_BOOL("bilevel.mean_only", bilevel.mean_only),
      {"bilevel.compare",
       [](ExperimentConfig& c, const std::string& v) { c.bilevel_compare = parse_list(v); }},

      OOD_REAL("ama.R", ama.R),
      OOD_REAL("ama.lip_target", ama.lip_target),
      OOD_INT("ama.outer_iterations", ama.outer_iterations),
      OOD_INT("ama.samples_for_misfit", ama.samples_for_misfit),
      OOD_INT("ama.w2_mc_samples", ama.w2_mc_samples),
      OOD_INT("ama.gradient_samples", ama.gradient_samples),
      OOD_INT("ama.fit_samples", ama.fit_samples),
      OOD_REAL("ama.step_size", ama.step_size),
      OOD_BOOL("ama.step_halving", ama.step_halving),
      {"ama.max_halvings",
       [](ExperimentConfig& c, const std::string& v) {
         c.ama.max_halvings = parse_integer<int>("ama.max_halvings", v);
       }},
      OOD_REAL("ama.tol_step", ama.tol_step),
      {"ama.form",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "bound")
           c.ama.form = ObjectiveForm::kBound;
         else if (v == "surrogate")
           c.ama.form = ObjectiveForm::kSurrogate;
         else
           bad("ama.form", "expected 'bound' or 'surrogate', got '" + v + "'");
       }},
      OOD_BOOL("ama.mean_only", ama.mean_only),
      OOD_INT("ama.probe_count", ama.probe_count),
      OOD_INT("ama.probe_pairs", ama.probe_pairs),
      OOD_INT("ama.particles", particles),

      {"baselines.kinds",
       [](ExperimentConfig& c, const std::string& v) { c.baselines = parse_list(v); }},

      {"eval.model", [](ExperimentConfig& c, const std::string& v) { c.eval_model = v; }},
      {"eval.trace", [](ExperimentConfig& c, const std::string& v) { c.eval_trace = v; }},

      {"sweep.sizes",
       [](ExperimentConfig& c, const std::string& v) {
         c.sweep_sizes.clear();
         for (const auto& s : parse_list(v))
           c.sweep_sizes.push_back(parse_integer<Index>("sweep.sizes", s));
       }},
      {"sweep.distributions",
       [](ExperimentConfig& c, const std::string& v) { c.sweep_distributions = parse_list(v); }},
  };
  return table;
}

#undef OOD_INT
#undef OOD_SEED
#undef OOD_REAL
#undef OOD_BOOL

bool is_distribution_name(const std::string& name, bool allow_optimized) {
  static const std::vector<std::string> known{"normal",   "barycenter", "mixture",
                                              "uniform",  "ncoreset",   "acoreset"};
  if (allow_optimized && name == "optimized") return true;
  return std::find(known.begin(), known.end(), name) != known.end();
}

}  // namespace

double ExperimentConfig::kernel_lengthscale() const {
  if (lengthscale) return *lengthscale;
  if (target == "g2") return 3.0;
  if (target == "g3") return 2.0 / 1.1;
  if (target == "g4") return 5.0;
  return 1.0;
}

void ExperimentConfig::validate() const {
  if (target != "g1" && target != "g2" && target != "g3" && target != "g4")
    bad("experiment.target", "unknown target id '" + target + "'");
  if (dim < 1) bad("experiment.dim", "must be >= 1");
  if (target == "g2" && dim < 5) bad("experiment.dim", "g2 needs dim >= 5");
  if (target == "g3" && dim < 4) bad("experiment.dim", "g3 needs dim >= 4");
  if (replicates < 1) bad("experiment.replicates", "must be >= 1");
  if (train_samples < 1) bad("experiment.train_samples", "must be >= 1");
  if (lengthscale && !(*lengthscale > 0.0)) bad("experiment.lengthscale", "must be positive");
  if (threads < 1) bad("experiment.threads", "must be >= 1");
  if (out.empty()) bad("experiment.out", "must be nonempty");
  if (ensemble_k < 1) bad("ensemble.K", "must be >= 1");
  if (ensemble_m < 1) bad("ensemble.M", "must be >= 1");
  if (particles < 1) bad("ama.particles", "must be >= 1");

  try {
    BilevelConfig b = bilevel;
    b.lengthscale = kernel_lengthscale();
    b.validate();
  } catch (const Error& e) {
    bad("bilevel", e.what());
  }
  try {
    ama.validate();
  } catch (const Error& e) {
    bad("ama", e.what());
  }
  for (const auto& name : bilevel_compare)
    if (!is_distribution_name(name, false)) bad("bilevel.compare", "unknown distribution '" + name + "'");
  for (const auto& name : baselines)
    if (!is_distribution_name(name, false)) bad("baselines.kinds", "unknown baseline '" + name + "'");
  for (const auto& name : sweep_distributions)
    if (!is_distribution_name(name, true))
      bad("sweep.distributions", "unknown distribution '" + name + "'");
  if (sweep_sizes.empty()) bad("sweep.sizes", "must list at least one size");
  for (Index n : sweep_sizes)
    if (n < 1) bad("sweep.sizes", "sizes must be >= 1");
  if (eval_model != "zero" && eval_model != "trace" && !is_distribution_name(eval_model, false))
    bad("eval.model", "expected 'zero', 'trace' or a baseline name, got '" + eval_model + "'");
  if (eval_model == "trace" && eval_trace.empty()) bad("eval.trace", "required when model = trace");
}

ExperimentConfig parse_config_string(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed config: ") + e.message() +
                                        " (line " + std::to_string(e.line()) + ")");
  }
  ExperimentConfig cfg;
  cfg.source = text;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    if (body.empty()) bad(section, "keys must appear inside a [section]");
    for (const auto& [key, value] : body) {
      const std::string field = section + "." + key;
      const auto it = table.find(field);
      if (it == table.end()) bad(field, "unknown field");
      it->second(cfg, trim(value.data()));
    }
  }
  cfg.bilevel.lr.horizon = std::max<Index>(1, cfg.bilevel.iterations);
  cfg.bilevel.nugget.horizon = cfg.bilevel.lr.horizon;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ood

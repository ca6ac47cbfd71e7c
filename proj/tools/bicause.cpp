// Command-line front end: fit, estimate, audit, explain, simulate, benchmark.
//
// Exit codes: 0 success, 2 usage or I/O problem, 3 data contract violation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bicause/bicause.hpp"

namespace {

using namespace bicause;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

// ---------------------------------------------------------------------------
// shared flag groups

struct SchemaFlags {
  std::string treatment = "T";
  std::string outcome = "Y";
  std::string features;  // comma-separated; empty means every other column
  std::string y0;
  std::string y1;

  void add_to(CLI::App* app) {
    app->add_option("--treatment", treatment, "treatment column")->capture_default_str();
    app->add_option("--outcome", outcome, "outcome column")->capture_default_str();
    app->add_option("--features", features, "comma-separated feature columns (default: all others)");
    app->add_option("--y0", y0, "potential outcome Y(0) column (default: y0 if present)");
    app->add_option("--y1", y1, "potential outcome Y(1) column (default: y1 if present)");
  }
};

struct FitFlags {
  FitConfig cfg;
  std::string positivity = "crump";
  std::string feature_selection = "max_asmd";
  std::string split_test = "auto";
  std::size_t max_split_candidates = 0;

  void add_to(CLI::App* app) {
    app->add_option("--max-depth", cfg.max_depth, "maximum tree depth")->capture_default_str();
    app->add_option("--asmd-threshold", cfg.asmd_threshold, "stop when every ASMD is below this")->capture_default_str();
    app->add_option("--min-treat-group-size", cfg.min_treat_group_size, "minimum treated and control count per node")
        ->capture_default_str();
    app->add_option("--min-leaf-population", cfg.min_leaf_population, "minimum node size to split (0 disables)")
        ->capture_default_str();
    app->add_option("--alpha", cfg.alpha, "family-wise error rate for pruning")->capture_default_str();
    app->add_option("--positivity", positivity, "crump or symmetric_prevalence")->capture_default_str();
    app->add_option("--crump-segments", cfg.crump_segments, "grid size of the Crump search")->capture_default_str();
    app->add_option("--sp-alpha", cfg.sp_alpha, "alpha of the symmetric prevalence cutoffs")->capture_default_str();
    app->add_option("--feature-selection", feature_selection, "max_asmd, random or combined_sq")->capture_default_str();
    app->add_option("--max-split-candidates", max_split_candidates, "quantile candidates per split (0: all values)");
    app->add_option("--split-test", split_test, "auto, fisher or chi2")->capture_default_str();
    app->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  }

  FitConfig resolve() {
    cfg.positivity_method = parse_positivity_method(positivity);
    cfg.feature_selection = parse_feature_selection(feature_selection);
    cfg.split_test = parse_split_test(split_test);
    if (max_split_candidates > 0) cfg.max_split_candidates = max_split_candidates;
    cfg.validate();
    return cfg;
  }
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto t = detail::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::vector<std::string> read_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("'" + path + "' has no header row");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  auto cells = detail::split_csv_line(line);
  for (auto& c : cells) c = std::string(detail::trim(c));
  return cells;
}

Dataset load_data(const std::string& path, const SchemaFlags& flags, const std::vector<std::string>& features = {}) {
  ColumnSchema schema;
  schema.treatment_column = flags.treatment;
  schema.outcome_column = flags.outcome;
  schema.feature_columns = features.empty() ? split_list(flags.features) : features;
  const auto header = read_header(path);
  const auto has = [&](const std::string& c) { return std::find(header.begin(), header.end(), c) != header.end(); };
  if (!flags.y0.empty() || !flags.y1.empty()) {
    schema.y0_column = flags.y0;
    schema.y1_column = flags.y1;
  } else if (has("y0") && has("y1")) {
    schema.y0_column = "y0";
    schema.y1_column = "y1";
  }
  return load_csv(path, schema);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("error while writing '" + path + "'");
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Fraction of the training rows that sit outside violating leaves.
double training_kept_fraction(const Tree& tree) {
  std::int64_t kept = 0;
  for (const auto id : tree.leaf_ids())
    if (!tree.node(id).is_violating) kept += tree.node(id).n;
  return static_cast<double>(kept) / static_cast<double>(tree.root().n);
}

// ---------------------------------------------------------------------------
// config file: flat "key = value" lines, keys are long flag names

struct ConfigEntry {
  std::string key;  // as written in the file
  std::string value;
};

// keyed by flag name: underscores in the file map to hyphens
std::map<std::string, ConfigEntry> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::map<std::string, ConfigEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw SchemaError("config file '" + path + "' line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(detail::trim(text.substr(0, eq)));
    std::string value(detail::trim(text.substr(eq + 1)));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    out[flag] = ConfigEntry{key, value};
  }
  return out;
}

// Values from the file fill only options that were not given on the command line.
void apply_config_file(CLI::App* app, const std::string& path) {
  for (const auto& [flag, entry] : read_config_file(path)) {
    if (flag == "config") throw SchemaError("config file '" + path + "' may not name another config file");
    CLI::Option* opt = app->get_option_no_throw("--" + flag);
    if (opt == nullptr) throw SchemaError("config file '" + path + "': unknown key '" + entry.key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(entry.value);
    opt->run_callback();
  }
}

// ---------------------------------------------------------------------------
// commands

int cmd_fit(const std::string& data_path, const SchemaFlags& schema, FitFlags& flags, const std::string& out_path,
            const std::string& dot_path) {
  const FitConfig cfg = flags.resolve();
  const Dataset ds = load_data(data_path, schema);
  const Tree tree = fit(ds, cfg);
  save_tree(tree, out_path);
  if (!dot_path.empty()) write_text(dot_path, tree_to_dot(tree));
  std::cout << "leaves=" << tree.num_leaves() << " violating_leaves=" << tree.violating_leaf_ids().size()
            << " kept_fraction=" << fmt(training_kept_fraction(tree)) << "\n";
  return 0;
}

int cmd_estimate(const std::string& tree_path, const std::string& data_path, const SchemaFlags& schema,
                 const std::string& estimator, double clip_lo, double clip_hi, const std::string& out_path,
                 const std::string& format) {
  const LeafEstimator est = parse_leaf_estimator(estimator);
  const Tree tree = load_tree(tree_path);
  const Dataset ds = load_data(data_path, schema, tree.metadata.feature_names);
  const EffectReport report = tree_ate(tree, ds, est, PropensityClip{clip_lo, clip_hi});
  if (!out_path.empty()) {
    const bool csv = format == "csv" || (format.empty() && out_path.size() >= 4 && out_path.ends_with(".csv"));
    write_text(out_path, csv ? to_csv(report) : to_json(report).dump(2) + "\n");
  }
  std::cout << "ate=" << detail::format_double(report.ate) << " kept_fraction=" << fmt(report.kept_fraction);
  if (est == LeafEstimator::ipw) std::cout << " fallback_count=" << report.fallback_count;
  std::cout << "\n";
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

json explanation_to_json(const LeafExplanation& e) {
  json rules = json::array();
  for (const auto& p : e.rules) {
    rules.push_back(json{{"feature", p.feature_name}, {"op", p.less_equal ? "<=" : ">"}, {"value", p.value}});
  }
  return json{{"leaf_id", e.leaf_id}, {"rule", e.rule_text()}, {"predicates", rules},  {"n", e.n},
              {"n_treated", e.n_treated}, {"n_control", e.n_control}, {"prevalence", e.prevalence},
              {"violating", e.violating}};
}

int cmd_audit(const std::string& tree_path, const std::string& format, const std::string& out_path) {
  if (format != "text" && format != "json") throw InvalidArgument("--format must be text or json");
  const Tree tree = load_tree(tree_path);
  json violating = json::array();
  std::vector<LeafExplanation> leaves;
  for (const int id : tree.violating_leaf_ids()) {
    leaves.push_back(explain_path(tree, id));
    violating.push_back(explanation_to_json(leaves.back()));
  }
  json report{{"n_leaves", tree.num_leaves()},
              {"n_violating", leaves.size()},
              {"kept_fraction", training_kept_fraction(tree)},
              {"violating_leaves", violating}};
  if (tree.cutoffs) {
    report["positivity"] = json{{"method", to_string(tree.cutoffs->method)}, {"lo", tree.cutoffs->lo}, {"hi", tree.cutoffs->hi}};
  } else {
    report["positivity"] = nullptr;
  }
  if (!out_path.empty()) write_text(out_path, report.dump(2) + "\n");

  if (format == "json") {
    std::cout << report.dump(2) << "\n";
    return 0;
  }
  if (tree.cutoffs) {
    std::cout << "positivity: " << to_string(tree.cutoffs->method) << " [" << fmt(tree.cutoffs->lo) << ", "
              << fmt(tree.cutoffs->hi) << "]\n";
  }
  std::cout << "violating leaves: " << leaves.size() << " of " << tree.num_leaves()
            << " (kept training fraction " << fmt(training_kept_fraction(tree)) << ")\n";
  for (const auto& e : leaves) {
    std::cout << "leaf " << e.leaf_id << ": " << e.rule_text() << "  n=" << e.n << " treated=" << e.n_treated
              << " control=" << e.n_control << " prevalence=" << fmt(e.prevalence) << "\n";
  }
  return 0;
}

int cmd_explain(const std::string& tree_path, int leaf, const std::string& format) {
  if (format != "text" && format != "json") throw InvalidArgument("--format must be text or json");
  const Tree tree = load_tree(tree_path);
  std::vector<int> ids = tree.leaf_ids();
  if (leaf >= 0) {
    if (leaf >= static_cast<int>(tree.nodes.size()) || !tree.node(leaf).is_leaf()) {
      throw InvalidArgument("node " + std::to_string(leaf) + " is not a leaf of this tree");
    }
    ids = {leaf};
  }
  json all = json::array();
  for (const int id : ids) {
    const auto e = explain_path(tree, id);
    json j = explanation_to_json(e);
    const auto& est = tree.node(id).leaf_estimate;
    j["effect"] = est && est->effect ? json(*est->effect) : json(nullptr);
    if (format == "json") {
      all.push_back(j);
      continue;
    }
    std::cout << "leaf " << id << (e.violating ? " [violating]" : "") << ": " << e.rule_text() << "  n=" << e.n
              << " prevalence=" << fmt(e.prevalence);
    if (est && est->effect) std::cout << " effect=" << fmt(*est->effect);
    std::cout << "\n";
  }
  if (format == "json") std::cout << all.dump(2) << "\n";
  return 0;
}

int cmd_simulate(const std::string& kind, std::int64_t n, std::uint64_t seed, int noise, const std::string& out_path) {
  GeneratorSpec spec;
  spec.kind = parse_generator_kind(kind);
  spec.n = n;
  spec.seed = seed;
  spec.extra_noise_features = noise;
  const Dataset ds = generate(spec);
  write_csv(ds, out_path);
  std::cout << "rows=" << ds.size() << " features=" << ds.num_features() << " out=" << out_path << "\n";
  return 0;
}

struct BenchmarkFlags {
  std::string kind;
  std::string data;
  std::int64_t n = 20000;
  int noise = 0;
  int reps = 50;
  std::string methods = "all";
  std::string mode = "bias";
  std::string depths = "1,2,3,4,5,6,8,10";
  int jobs = 1;
  double train_fraction = 0.5;
  double clip_lo = 0.001;
  double clip_hi = 0.999;
  std::string out = "benchmark";
  bool no_runtime = false;
};

void print_summary(const BenchmarkResult& r, const std::string& label = "") {
  for (const auto& s : r.summary) {
    std::cout << (label.empty() ? "" : label + " ") << to_string(s.method) << ": median_abs_bias="
              << fmt(s.median_abs_bias) << " mean_bias=" << fmt(s.mean_bias) << " sd=" << fmt(s.sd_bias)
              << " kept_fraction=" << fmt(s.mean_kept_fraction) << " ok=" << s.n_ok << " failed=" << s.n_failed
              << "\n";
  }
}

int cmd_benchmark(BenchmarkFlags& b, const SchemaFlags& schema, FitFlags& fit_flags) {
  const FitConfig cfg = fit_flags.resolve();
  if (b.kind.empty() == b.data.empty()) throw InvalidArgument("give exactly one of --kind and --data");
  const auto methods = parse_methods(b.methods);
  if (b.reps < 1) throw InvalidArgument("--reps must be at least 1");
  Dataset ds;
  if (!b.kind.empty()) {
    GeneratorSpec spec;
    spec.kind = parse_generator_kind(b.kind);
    spec.n = b.n;
    spec.seed = cfg.seed;
    spec.extra_noise_features = b.noise;
    ds = generate(spec);
  } else {
    ds = augment_noise_features(load_data(b.data, schema), b.noise, cfg.seed);
  }
  if (!ds.has_potential_outcomes()) throw InvalidArgument("benchmark data needs y0 and y1 columns");
  BenchmarkOptions options;
  options.train_fraction = b.train_fraction;
  options.jobs = b.jobs;
  options.clip = {b.clip_lo, b.clip_hi};

  std::ostringstream bias, summary;
  if (b.mode == "bias") {
    const auto r = run_bias_benchmark(ds, methods, b.reps, cfg.seed, cfg, options);
    write_bias_csv(r, bias, !b.no_runtime);
    write_summary_csv(r, summary);
    write_text(b.out + "_bias.csv", bias.str());
    write_text(b.out + "_summary.csv", summary.str());
    print_summary(r);
  } else if (b.mode == "depth-sweep") {
    std::vector<int> depths;
    for (const auto& d : split_list(b.depths)) {
      const auto v = detail::parse_double(d);
      if (!v || *v < 1 || *v != static_cast<int>(*v)) throw InvalidArgument("bad depth '" + d + "'");
      depths.push_back(static_cast<int>(*v));
    }
    const auto s = depth_sweep(ds, depths, b.reps, cfg.seed, cfg, options);
    std::ostringstream asmd;
    write_depth_bias_csv(s, bias);
    write_depth_asmd_csv(s, asmd);
    write_text(b.out + "_depth_bias.csv", bias.str());
    write_text(b.out + "_depth_asmd.csv", asmd.str());
    for (std::size_t k = 0; k < s.depths.size(); ++k) print_summary(s.results[k], "depth=" + std::to_string(s.depths[k]));
  } else if (b.mode == "ablation") {
    const auto a = ablation_feature_selection(ds, b.reps, cfg.seed, cfg, options);
    summary << "feature_selection,median_abs_bias,median_max_weighted_asmd\n"
            << "max_asmd," << detail::format_double(a.max_asmd.summary.front().median_abs_bias) << ','
            << detail::format_double(median_max_weighted_asmd(a.max_asmd)) << '\n'
            << "random," << detail::format_double(a.random.summary.front().median_abs_bias) << ','
            << detail::format_double(median_max_weighted_asmd(a.random)) << '\n';
    write_text(b.out + "_ablation.csv", summary.str());
    std::cout << summary.str();
  } else {
    throw InvalidArgument("--mode must be bias, depth-sweep or ablation");
  }
  return 0;
}

int cmd_asmd_demo(std::uint64_t seed, std::int64_t n) {
  std::cout << "model,treatment_coefficient\n";
  for (const auto& e : asmd_adjustment_demo(seed, n)) std::cout << e.model << ',' << detail::format_double(e.treatment_coefficient) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BICauseTree: balance-inducing causal trees for effect estimation and positivity auditing"};
  app.require_subcommand(1);

  SchemaFlags schema;
  FitFlags fit_flags;
  std::string config_path, data_path, tree_path, out_path, dot_path, format, estimator = "marginal";
  double clip_lo = 0.001, clip_hi = 0.999;
  int leaf = -1;

  std::vector<CLI::App*> with_config;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value file; command-line flags take precedence");
    with_config.push_back(sub);
  };

  auto* fit_cmd = app.add_subcommand("fit", "grow, prune and audit a tree, write it as JSON");
  fit_cmd->add_option("--data", data_path, "training CSV");
  schema.add_to(fit_cmd);
  fit_flags.add_to(fit_cmd);
  fit_cmd->add_option("--out", out_path, "tree JSON output");
  fit_cmd->add_option("--emit-dot", dot_path, "also write a Graphviz rendering");
  add_config(fit_cmd);

  auto* est_cmd = app.add_subcommand("estimate", "average treatment effect of a fitted tree on a dataset");
  est_cmd->add_option("--tree", tree_path, "tree JSON");
  est_cmd->add_option("--data", data_path, "CSV to estimate on");
  schema.add_to(est_cmd);
  est_cmd->add_option("--estimator", estimator, "marginal or ipw")->capture_default_str();
  est_cmd->add_option("--clip-lo", clip_lo, "lower propensity clip for ipw")->capture_default_str();
  est_cmd->add_option("--clip-hi", clip_hi, "upper propensity clip for ipw")->capture_default_str();
  est_cmd->add_option("--out", out_path, "report output (.json or .csv)");
  est_cmd->add_option("--format", format, "json or csv (default: from --out extension)");
  add_config(est_cmd);

  std::string audit_format = "text";
  auto* audit_cmd = app.add_subcommand("audit", "describe the positivity-violating subpopulations of a tree");
  audit_cmd->add_option("--tree", tree_path, "tree JSON");
  audit_cmd->add_option("--format", audit_format, "text or json")->capture_default_str();
  audit_cmd->add_option("--out", out_path, "also write the JSON report here");
  add_config(audit_cmd);

  std::string explain_format = "text";
  auto* explain_cmd = app.add_subcommand("explain", "print the decision rule of every leaf");
  explain_cmd->add_option("--tree", tree_path, "tree JSON");
  explain_cmd->add_option("--leaf", leaf, "only this leaf id");
  explain_cmd->add_option("--format", explain_format, "text or json")->capture_default_str();
  add_config(explain_cmd);

  std::string kind;
  std::int64_t sim_n = 20000;
  std::uint64_t sim_seed = 0;
  int sim_noise = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic dataset with potential outcomes");
  sim_cmd->add_option("kind", kind, "natural-experiment or positivity")->required();
  sim_cmd->add_option("--n", sim_n, "rows")->capture_default_str()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim_seed, "random seed")->capture_default_str();
  sim_cmd->add_option("--noise-features", sim_noise, "extra independent normal columns")->capture_default_str()->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--out", out_path, "CSV output");
  add_config(sim_cmd);

  BenchmarkFlags bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "replicated train/test bias evaluation");
  bench_cmd->add_option("--kind", bench.kind, "simulated dataset: natural-experiment or positivity");
  bench_cmd->add_option("--data", bench.data, "CSV with y0 and y1 columns");
  schema.add_to(bench_cmd);
  fit_flags.add_to(bench_cmd);
  bench_cmd->add_option("--n", bench.n, "rows of the simulated dataset")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--noise-features", bench.noise, "extra independent normal columns")->capture_default_str()->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--reps", bench.reps, "replications")->capture_default_str();
  bench_cmd->add_option("--methods", bench.methods, "all or a comma-separated list")->capture_default_str();
  bench_cmd->add_option("--mode", bench.mode, "bias, depth-sweep or ablation")->capture_default_str();
  bench_cmd->add_option("--depths", bench.depths, "depths for depth-sweep")->capture_default_str();
  bench_cmd->add_option("--jobs", bench.jobs, "parallel replications")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--train-fraction", bench.train_fraction, "training share of each split")->capture_default_str();
  bench_cmd->add_option("--clip-lo", bench.clip_lo, "lower propensity clip for IPW methods")->capture_default_str();
  bench_cmd->add_option("--clip-hi", bench.clip_hi, "upper propensity clip for IPW methods")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "output file prefix")->capture_default_str();
  bench_cmd->add_flag("--no-runtime", bench.no_runtime, "write 0 for runtimes so outputs are byte-identical");
  add_config(bench_cmd);

  std::uint64_t demo_seed = 0;
  std::int64_t demo_n = 100000;
  auto* demo_cmd = app.add_subcommand("asmd-demo", "treatment coefficient under four regression adjustment sets");
  demo_cmd->add_option("--seed", demo_seed, "random seed")->capture_default_str();
  demo_cmd->add_option("--n", demo_n, "rows")->capture_default_str();
  add_config(demo_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    for (auto* sub : with_config) {
      if (sub->parsed() && !config_path.empty()) apply_config_file(sub, config_path);
    }
    auto need = [](const std::string& value, const char* flag) {
      if (value.empty()) throw InvalidArgument(std::string(flag) + " is required");
    };
    if (fit_cmd->parsed() || est_cmd->parsed()) need(data_path, "--data");
    if (est_cmd->parsed() || audit_cmd->parsed() || explain_cmd->parsed()) need(tree_path, "--tree");
    if (fit_cmd->parsed() || sim_cmd->parsed()) need(out_path, "--out");
    if (fit_cmd->parsed()) return cmd_fit(data_path, schema, fit_flags, out_path, dot_path);
    if (est_cmd->parsed()) return cmd_estimate(tree_path, data_path, schema, estimator, clip_lo, clip_hi, out_path, format);
    if (audit_cmd->parsed()) return cmd_audit(tree_path, audit_format, out_path);
    if (explain_cmd->parsed()) return cmd_explain(tree_path, leaf, explain_format);
    if (sim_cmd->parsed()) return cmd_simulate(kind, sim_n, sim_seed, sim_noise, out_path);
    if (bench_cmd->parsed()) return cmd_benchmark(bench, schema, fit_flags);
    if (demo_cmd->parsed()) return cmd_asmd_demo(demo_seed, demo_n);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

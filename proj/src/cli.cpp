#include "sur/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sur/episodes.hpp"
#include "sur/error.hpp"
#include "sur/feature_bank.hpp"
#include "sur/harness.hpp"
#include "sur/report.hpp"

namespace sur::cli {

namespace {

namespace fs = std::filesystem;

/// Raised for problems with the invocation or its inputs (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr std::string_view kSynthBank = "synth";

// inspect ------------------------------------------------------------------

int cmd_inspect(const std::string& path, std::ostream& out) {
  const FeatureBank bank = load_bank(path);
  out << "dataset: " << bank.dataset_name() << '\n';
  out << "items: " << bank.size() << '\n';
  out << "extractors: " << bank.num_extractors() << '\n';
  std::size_t total = 0;
  for (const auto& e : bank.extractors()) {
    out << "  " << e.name << "  dim " << e.dim << '\n';
    total += e.dim;
  }
  out << "total dim: " << total << '\n';
  const auto classes = bank.classes();
  out << "classes: " << classes.size() << " (label cardinality " << bank.label_cardinality() << ")\n";
  std::map<std::uint32_t, std::size_t> histogram;
  for (auto l : bank.labels()) ++histogram[l];
  out << "label histogram:\n";
  for (const auto& [label, count] : histogram) {
    out << "  " << label;
    if (auto it = bank.class_names().find(label); it != bank.class_names().end()) {
      out << " (" << it->second << ")";
    }
    out << ": " << count << '\n';
  }
  return kExitOk;
}

// synth --------------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  std::string out_dir;
  std::string format = "surb";
};

int cmd_synth(const SynthArgs& args, std::ostream& out) {
  if (args.format != "surb" && args.format != "csv") {
    throw UsageError("--format must be surb or csv");
  }
  std::vector<FeatureBank> banks;
  try {
    banks = make_synthetic_banks(args.spec);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  fs::create_directories(args.out_dir);
  nlohmann::ordered_json manifest;
  const auto& s = args.spec;
  manifest["spec"] = {{"n_domains", s.n_domains},
                      {"classes_per_domain", s.classes_per_domain},
                      {"items_per_class", s.items_per_class},
                      {"dim", s.dim},
                      {"signal_strength", s.signal_strength},
                      {"noise_sigma", s.noise_sigma},
                      {"seed", s.seed},
                      {"generalist_blocks", s.generalist_blocks},
                      {"generalist_strength", s.generalist_strength}};
  manifest["banks"] = nlohmann::ordered_json::array();
  for (const auto& bank : banks) {
    const fs::path path = fs::path(args.out_dir) / (bank.dataset_name() + "." + args.format);
    save_bank(bank, path);
    manifest["banks"].push_back(path.filename().string());
    out << path.string() << '\n';
  }
  const fs::path manifest_file = fs::path(args.out_dir) / "synth.json";
  write_text(manifest_file, manifest.dump(2) + "\n");
  out << manifest_file.string() << '\n';
  return kExitOk;
}

// eval ---------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> banks;
  std::vector<std::string> methods;
  std::string experiment;
  SamplerConfig sampler;
  std::string way = "5";
  std::string shots = "5";
  SelectorConfig selector;
  unsigned workers = 1;
  std::string out_path;
  std::string format;
  std::string dump_lambdas;
  bool timing = false;
  // Which sampler flags were given explicitly (they override an experiment file).
  bool way_set = false, shots_set = false, queries_set = false, episodes_set = false, seed_set = false;
};

std::vector<FeatureBank> load_banks(const std::vector<std::string>& specs, const fs::path& base) {
  std::vector<FeatureBank> banks;
  for (const auto& spec : specs) {
    if (spec == kSynthBank) {
      auto synth = make_synthetic_banks(SyntheticSpec{});
      std::move(synth.begin(), synth.end(), std::back_inserter(banks));
      continue;
    }
    fs::path path(spec);
    if (path.is_relative() && !base.empty()) path = base / path;
    banks.push_back(load_bank(path));
  }
  return banks;
}

CountRange count_from_json(const nlohmann::json& j) {
  if (j.is_number_unsigned()) return CountRange(j.get<std::uint32_t>());
  if (j.is_string()) return CountRange::parse(j.get<std::string>());
  if (j.is_array() && j.size() == 2) return {j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>()};
  throw Error(ErrorKind::InvalidArgument, "expected an integer, \"MIN..MAX\" or [MIN, MAX]: " + j.dump());
}

MethodSpec method_from_json(const nlohmann::json& j, const SelectorConfig& defaults) {
  if (j.is_string()) return MethodSpec::parse(j.get<std::string>(), defaults);
  SelectorConfig cfg = defaults;
  if (j.contains("selector")) {
    const auto& s = j.at("selector");
    cfg.iterations = s.value("iterations", cfg.iterations);
    cfg.learning_rate = s.value("learning_rate", cfg.learning_rate);
    cfg.adadelta_rho = s.value("adadelta_rho", cfg.adadelta_rho);
    cfg.adadelta_eps = s.value("adadelta_eps", cfg.adadelta_eps);
    cfg.temperature = s.value("temperature", cfg.temperature);
    cfg.l1_penalty = s.value("l1_penalty", cfg.l1_penalty);
  }
  const auto kind = j.at("kind").get<std::string>();
  const auto names = j.value("names", std::vector<std::string>{});
  if (kind == "single") {
    if (names.size() != 1) throw Error(ErrorKind::InvalidArgument, "single needs exactly one name");
    return MethodSpec::single(names[0]);
  }
  if (kind == "concat") return MethodSpec::concat();
  if (kind == "sur") return MethodSpec::sur(cfg);
  if (kind == "sur_subset" || kind == "sur-subset") return MethodSpec::sur_subset(names, cfg);
  throw Error(ErrorKind::InvalidArgument, "unknown method kind '" + kind + "'");
}

struct Plan {
  std::vector<FeatureBank> banks;
  std::vector<MethodSpec> methods;
  SamplerConfig sampler;
};

Plan plan_eval(const EvalArgs& args) {
  Plan plan;
  SamplerConfig sampler;
  std::vector<std::string> bank_specs = args.banks;
  fs::path base;

  try {
    if (!args.experiment.empty()) {
      std::ifstream in(args.experiment);
      if (!in) throw UsageError("cannot open experiment file " + args.experiment);
      nlohmann::json j;
      try {
        in >> j;
        base = fs::path(args.experiment).parent_path();
        bank_specs = j.at("banks").get<std::vector<std::string>>();
        for (const auto& m : j.at("methods")) plan.methods.push_back(method_from_json(m, args.selector));
        if (j.contains("sampler")) {
          const auto& s = j.at("sampler");
          if (s.contains("way")) sampler.way = count_from_json(s.at("way"));
          if (s.contains("shots")) sampler.shots = count_from_json(s.at("shots"));
          sampler.queries_per_class = s.value("queries", sampler.queries_per_class);
          sampler.episodes = s.value("episodes", sampler.episodes);
          sampler.seed = s.value("seed", sampler.seed);
        }
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("malformed experiment file " + args.experiment + ": " + e.what());
      }
    } else {
      for (const auto& m : args.methods) plan.methods.push_back(MethodSpec::parse(m, args.selector));
      if (plan.methods.empty()) plan.methods.push_back(MethodSpec::sur(args.selector));
    }
    if (args.way_set || args.experiment.empty()) sampler.way = CountRange::parse(args.way);
    if (args.shots_set || args.experiment.empty()) sampler.shots = CountRange::parse(args.shots);
    if (args.queries_set || args.experiment.empty()) sampler.queries_per_class = args.sampler.queries_per_class;
    if (args.episodes_set || args.experiment.empty()) sampler.episodes = args.sampler.episodes;
    if (args.seed_set || args.experiment.empty()) sampler.seed = args.sampler.seed;
    sampler.validate();
    for (const auto& m : plan.methods) {
      if (m.is_sur()) m.selector.validate();
    }

    if (bank_specs.empty()) throw UsageError("no banks given (use --bank PATH or --experiment FILE)");
    plan.banks = load_banks(bank_specs, base);
    for (const auto& bank : plan.banks) {
      for (const auto& m : plan.methods) m.check_against(bank);
    }
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  plan.sampler = sampler;
  return plan;
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const Plan plan = plan_eval(args);

  ReportFormat format = ReportFormat::Csv;
  if (!args.format.empty()) {
    format = parse_report_format(args.format);
  } else if (fs::path(args.out_path).extension() == ".json") {
    format = ReportFormat::Json;
  }

  const Evaluation evaluation = evaluate(plan.banks, plan.methods, plan.sampler, RunOptions{args.workers});

  out << format_summary(evaluation.report);
  const EvalReport written = args.timing ? evaluation.report : evaluation.report.without_runtime();
  if (!args.out_path.empty()) {
    write_report(written, args.out_path, format);
    out << "report: " << args.out_path << '\n';
    if (format == ReportFormat::Csv) out << "lambdas: " << lambda_table_path(args.out_path).string() << '\n';
  }
  if (!args.dump_lambdas.empty()) {
    write_lambda_dump(evaluation.traces, args.dump_lambdas);
    out << "lambda dump: " << args.dump_lambdas << '\n';
  }
  return kExitOk;
}

// lambda-stats -------------------------------------------------------------

struct LambdaStatsArgs {
  std::string dump;
  std::string method;
  std::string out_path;
  std::string svg_path;
};

int cmd_lambda_stats(const LambdaStatsArgs& args, std::ostream& out) {
  std::vector<LambdaTrace> traces;
  try {
    if (!fs::exists(args.dump)) throw UsageError("no such lambda dump: " + args.dump);
    traces = read_lambda_dump(args.dump);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::string method = args.method;
  if (method.empty()) {
    const bool single_method = std::all_of(traces.begin(), traces.end(),
                                           [&](const LambdaTrace& t) { return t.method == traces[0].method; });
    method = single_method ? traces[0].method : "sur";
  }
  std::vector<LambdaTrace> selected;
  std::copy_if(traces.begin(), traces.end(), std::back_inserter(selected),
               [&](const LambdaTrace& t) { return t.method == method; });
  if (selected.empty()) throw UsageError("dump " + args.dump + " has no traces for method '" + method + "'");

  const auto heatmap = lambda_heatmap(selected);
  const auto csv = heatmap_csv(heatmap);
  if (args.out_path.empty()) {
    out << csv;
  } else {
    write_text(args.out_path, csv);
    out << "heatmap: " << args.out_path << '\n';
  }
  if (!args.svg_path.empty()) {
    write_text(args.svg_path, heatmap_svg(heatmap));
    out << "svg: " << args.svg_path << '\n';
  }
  return kExitOk;
}

// convert ------------------------------------------------------------------

int cmd_convert(const std::string& in, const std::string& to, std::ostream& out) {
  const auto bank = load_bank(in);
  save_bank(bank, to);
  out << to << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Select relevant feature blocks from multi-domain feature banks for few-shot classification",
               "sur"};
  app.require_subcommand(1);

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Summarize a feature bank");
  inspect->add_option("bank", inspect_path, "SURB or CSV bank")->required();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write synthetic multi-domain banks (one per domain)");
  synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
  synth->add_option("--domains", synth_args.spec.n_domains, "Number of domains (= informative extractors)")
      ->capture_default_str();
  synth->add_option("--classes", synth_args.spec.classes_per_domain, "Classes per domain")->capture_default_str();
  synth->add_option("--items", synth_args.spec.items_per_class, "Items per class")->capture_default_str();
  synth->add_option("--dim", synth_args.spec.dim, "Block dimension")->capture_default_str();
  synth->add_option("--signal", synth_args.spec.signal_strength, "Prototype scale s")->capture_default_str();
  synth->add_option("--noise", synth_args.spec.noise_sigma, "Noise sigma")->capture_default_str();
  synth->add_option("--generalist", synth_args.spec.generalist_blocks, "Blocks informative on every domain")
      ->capture_default_str();
  synth->add_option("--generalist-strength", synth_args.spec.generalist_strength,
                    "Generalist signal relative to --signal")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.spec.seed, "RNG seed")->capture_default_str();
  synth->add_option("--format", synth_args.format, "surb or csv")->capture_default_str();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate methods over sampled episodes");
  auto* bank_opt = eval->add_option("--bank", eval_args.banks, "Bank path, or 'synth' for the default synthetic suite");
  auto* method_opt = eval->add_option("--method", eval_args.methods,
                                      "single:NAME | concat | sur | sur-subset:A,B,... (repeatable)");
  auto* experiment_opt = eval->add_option("--experiment", eval_args.experiment, "JSON experiment file");
  experiment_opt->excludes(bank_opt)->excludes(method_opt);
  auto* episodes_opt = eval->add_option("--episodes", eval_args.sampler.episodes, "Episodes per dataset")
                           ->capture_default_str();
  auto* way_opt = eval->add_option("--way", eval_args.way, "INT or MIN..MAX")->capture_default_str();
  auto* shots_opt = eval->add_option("--shots", eval_args.shots, "INT or MIN..MAX")->capture_default_str();
  auto* queries_opt = eval->add_option("--queries", eval_args.sampler.queries_per_class, "Queries per class")
                          ->capture_default_str();
  auto* seed_opt = eval->add_option("--seed", eval_args.sampler.seed, "Episode stream seed")->capture_default_str();
  eval->add_option("--iterations", eval_args.selector.iterations, "Selection iterations")->capture_default_str();
  eval->add_option("--lr", eval_args.selector.learning_rate, "Adadelta learning rate")->capture_default_str();
  eval->add_option("--rho", eval_args.selector.adadelta_rho, "Adadelta rho")->capture_default_str();
  eval->add_option("--eps", eval_args.selector.adadelta_eps, "Adadelta epsilon")->capture_default_str();
  eval->add_option("--temperature", eval_args.selector.temperature, "Cosine logit multiplier")
      ->capture_default_str();
  eval->add_option("--l1", eval_args.selector.l1_penalty, "L1 penalty on lambda")->capture_default_str();
  eval->add_option("--workers", eval_args.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--out", eval_args.out_path, "Report path");
  eval->add_option("--format", eval_args.format, "csv or json (default: from --out extension)")
      ->check(CLI::IsMember({"csv", "json"}));
  eval->add_option("--dump-lambdas", eval_args.dump_lambdas, "Write per-episode lambdas (CSV)");
  eval->add_flag("--timing", eval_args.timing, "Record measured runtimes in report files (otherwise 0)");

  LambdaStatsArgs ls_args;
  auto* lambda_stats = app.add_subcommand("lambda-stats", "Extractor x dataset lambda heatmap from a dump");
  lambda_stats->add_option("dump", ls_args.dump, "Lambda dump written by eval --dump-lambdas")->required();
  lambda_stats->add_option("--method", ls_args.method, "Method whose traces to use");
  lambda_stats->add_option("--out", ls_args.out_path, "Heatmap CSV (default: stdout)");
  lambda_stats->add_option("--svg", ls_args.svg_path, "Also write an SVG heatmap");

  std::string convert_in, convert_out;
  auto* convert = app.add_subcommand("convert", "Convert between CSV and SURB banks (by extension)");
  convert->add_option("input", convert_in)->required();
  convert->add_option("output", convert_out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  eval_args.way_set = way_opt->count() > 0;
  eval_args.shots_set = shots_opt->count() > 0;
  eval_args.queries_set = queries_opt->count() > 0;
  eval_args.episodes_set = episodes_opt->count() > 0;
  eval_args.seed_set = seed_opt->count() > 0;

  try {
    if (*inspect) return cmd_inspect(inspect_path, out);
    if (*synth) return cmd_synth(synth_args, out);
    if (*lambda_stats) return cmd_lambda_stats(ls_args, out);
    if (*convert) return cmd_convert(convert_in, convert_out, out);
    if (*eval) {
      try {
        return cmd_eval(eval_args, out);
      } catch (const Error& e) {
        // Configuration problems surface as UsageError from plan_eval; what
        // remains happened while running.
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
      }
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sur::cli

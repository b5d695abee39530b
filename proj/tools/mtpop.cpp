#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mtpop/error.hpp"
#include "mtpop/eval.hpp"
#include "mtpop/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mtpop;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || text.empty() || text[0] == '-') {
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, text));
  }
  return static_cast<std::size_t>(v);
}

double to_real(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || text.empty()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
  }
  return v;
}

// name:window[,name:window...]
ScalePlan parse_plan(const std::string& text) {
  ScalePlan plan;
  for (const auto& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ConfigError(fmt::format("mt.scales: bad entry '{}'", item));
    plan.scales.push_back({parts[0], to_size("mt.scales", parts[1])});
  }
  return plan;
}

std::string plan_text(const ScalePlan& plan) {
  std::string out;
  for (const auto& s : plan.scales) out += fmt::format("{}{}:{}", out.empty() ? "" : ",", s.name, s.window_bins);
  return out;
}

// name:window:rank:amplitude[,...]
std::vector<SynthScale> parse_synth_scales(const std::string& text) {
  std::vector<SynthScale> out;
  for (const auto& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 4) throw ConfigError(fmt::format("synth.scales: bad entry '{}'", item));
    out.push_back({parts[0], to_size("synth.scales", parts[1]), to_size("synth.scales", parts[2]),
                   to_real("synth.scales", parts[3])});
  }
  return out;
}

std::string synth_scales_text(const std::vector<SynthScale>& scales) {
  std::string out;
  for (const auto& s : scales) {
    out += fmt::format("{}{}:{}:{}:{}", out.empty() ? "" : ",", s.name, s.window_bins,
                       s.block_rank, s.amplitude);
  }
  return out;
}

struct RunConfig {
  std::string input;
  std::string output;
  std::string queries;
  std::vector<std::string> methods{"mt", "av", "lr", "bg", "tmf"};
  double bin_width_days = 1.0;
  ExperimentConfig experiment;
  MethodConfig method;
  SynthConfig synth;
};

// Every key is a dotted path to one field; values are always written and
// read through their text form so a config.echo file loads back unchanged.
struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string bool_text(bool b) { return b ? "true" : "false"; }
bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, s));
}

#define REAL(KEY, EXPR) \
  Field{KEY, [](const RunConfig& c) { return fmt::format("{}", c.EXPR); }, \
        [](RunConfig& c, const std::string& s) { c.EXPR = to_real(KEY, s); }}
#define SIZE(KEY, EXPR) \
  Field{KEY, [](const RunConfig& c) { return fmt::format("{}", c.EXPR); }, \
        [](RunConfig& c, const std::string& s) { c.EXPR = to_size(KEY, s); }}
#define BOOL(KEY, EXPR) \
  Field{KEY, [](const RunConfig& c) { return bool_text(c.EXPR); }, \
        [](RunConfig& c, const std::string& s) { c.EXPR = to_bool(KEY, s); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> all{
      Field{"input", [](const RunConfig& c) { return c.input; },
            [](RunConfig& c, const std::string& s) { c.input = s; }},
      Field{"output", [](const RunConfig& c) { return c.output; },
            [](RunConfig& c, const std::string& s) { c.output = s; }},
      Field{"queries", [](const RunConfig& c) { return c.queries; },
            [](RunConfig& c, const std::string& s) { c.queries = s; }},
      Field{"methods",
            [](const RunConfig& c) {
              std::string out;
              for (const auto& m : c.methods) out += (out.empty() ? "" : ",") + m;
              return out;
            },
            [](RunConfig& c, const std::string& s) { c.methods = split(s, ','); }},
      SIZE("seed", experiment.seed),
      SIZE("folds", experiment.folds),
      BOOL("stratify_by_user", experiment.stratify_by_user),
      REAL("bin_width_days", bin_width_days),
      SIZE("threads", method.mt.solver.threads),
      Field{"mt.scales", [](const RunConfig& c) { return plan_text(c.method.mt.plan); },
            [](RunConfig& c, const std::string& s) { c.method.mt.plan = parse_plan(s); }},
      SIZE("mt.max_iter", method.mt.solver.max_iter),
      REAL("mt.tol", method.mt.solver.tol),
      Field{"mt.lambda_mode",
            [](const RunConfig& c) {
              return std::string(c.method.mt.solver.lambda_mode == LambdaMode::paper_rule
                                     ? "paper_rule"
                                     : "scaled");
            },
            [](RunConfig& c, const std::string& s) {
              if (s == "paper_rule") c.method.mt.solver.lambda_mode = LambdaMode::paper_rule;
              else if (s == "scaled") c.method.mt.solver.lambda_mode = LambdaMode::scaled;
              else throw ConfigError(fmt::format("mt.lambda_mode: '{}' (valid: paper_rule, scaled)", s));
            }},
      REAL("mt.lambda_scale", method.mt.solver.lambda_scale),
      BOOL("mt.correlation_select", method.mt.solver.correlation_select),
      BOOL("mt.random_init", method.mt.solver.random_init),
      BOOL("mt.rearrange", method.mt.rearrange),
      BOOL("mt.center", method.mt.center),
      SIZE("mt.k_user", method.mt.k_user),
      SIZE("mt.k_post", method.mt.k_post),
      Field{"mt.rounding",
            [](const RunConfig& c) {
              return std::string(c.method.mt.rounding == BlockRounding::base2 ? "base2" : "base_e");
            },
            [](RunConfig& c, const std::string& s) {
              if (s == "base2") c.method.mt.rounding = BlockRounding::base2;
              else if (s == "base_e") c.method.mt.rounding = BlockRounding::base_e;
              else throw ConfigError(fmt::format("mt.rounding: '{}' (valid: base2, base_e)", s));
            }},
      SIZE("av.neighbours", method.av.neighbours),
      SIZE("av.pool_size", method.av.pool_size),
      REAL("lr.ridge", method.lr_ridge),
      REAL("bg.fit_weight", method.bg.fit_weight),
      SIZE("bg.max_sweeps", method.bg.max_sweeps),
      REAL("bg.tol", method.bg.tol),
      SIZE("tmf.rank", method.tmf.rank),
      REAL("tmf.lambda_u", method.tmf.lambda_u),
      REAL("tmf.lambda_v", method.tmf.lambda_v),
      REAL("tmf.learning_rate", method.tmf.learning_rate),
      SIZE("tmf.epochs", method.tmf.epochs),
      SIZE("synth.users", synth.dims.user),
      SIZE("synth.posts", synth.dims.post),
      SIZE("synth.time_bins", synth.dims.time),
      Field{"synth.scales", [](const RunConfig& c) { return synth_scales_text(c.synth.scales); },
            [](RunConfig& c, const std::string& s) { c.synth.scales = parse_synth_scales(s); }},
      REAL("synth.noise_sigma", synth.noise_sigma),
      REAL("synth.observe_frac", synth.observe_frac),
      SIZE("synth.user_clusters", synth.user_clusters),
      SIZE("synth.post_clusters", synth.post_clusters),
      SIZE("synth.user_feature_dims", synth.user_feature_dims),
      SIZE("synth.post_feature_dims", synth.post_feature_dims),
      REAL("synth.base_popularity", synth.base_popularity),
      REAL("synth.cluster_offset", synth.cluster_offset),
      REAL("synth.feature_jitter", synth.feature_jitter),
      Field{"synth.time_origin", [](const RunConfig& c) { return fmt::format("{}", c.synth.time_origin); },
            [](RunConfig& c, const std::string& s) { c.synth.time_origin = parse_timestamp(s); }},
  };
  return all;
}

#undef REAL
#undef SIZE
#undef BOOL

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

void load_config(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config file {}: {}", path, e.what()));
  }
  if (!doc.is_object()) throw ConfigError(fmt::format("config file {}: expected an object", path));
  for (const auto& [key, value] : doc.items()) {
    if (value.is_string()) set_key(cfg, key, value.get<std::string>());
    else if (value.is_boolean()) set_key(cfg, key, bool_text(value.get<bool>()));
    else if (value.is_number_integer() || value.is_number_unsigned() || value.is_number_float()) set_key(cfg, key, value.dump());
    else throw ConfigError(fmt::format("config key '{}' must be a string, number or boolean", key));
  }
}

json echo(const RunConfig& cfg) {
  json doc = json::object();
  for (const auto& f : fields()) doc[f.key] = f.get(cfg);
  return doc;
}

fs::path prepare_output(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--output is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError(fmt::format("cannot create output directory {}", dir));
  }
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  return out;
}

void write_echo(const RunConfig& cfg, const fs::path& dir) {
  open_out(dir / "config.echo") << echo(cfg).dump(2) << '\n';
}

Dataset load_dataset(const RunConfig& cfg, const std::string& path) {
  if (path.empty()) throw ConfigError("--input is required");
  if (!fs::exists(path)) throw DataError(fmt::format("input file {} does not exist", path));
  IngestResult r = ingest(path, DataFormat::automatic, cfg.bin_width_days);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  if (!r.rejected.empty()) {
    std::cerr << fmt::format("warning: {} rows rejected, first at line {}: {}\n", r.rejected.size(),
                             r.rejected.front().line, r.rejected.front().reason);
  }
  return std::move(r.dataset);
}

void write_reports(std::vector<EvalReport> reports, const fs::path& dir, bool sort) {
  if (sort) sort_by_median(reports);
  auto table = open_out(dir / "report.txt");
  write_report_table(reports, table);
  auto rows = open_out(dir / "report.jsonl");
  write_report_jsonl(reports, rows);
  for (const auto& r : reports) {
    std::cout << fmt::format("{}{} median_rs={:.4f} folds={} skipped={} runtime={:.1f}s\n", r.method,
                             r.variant.empty() ? "" : " " + r.variant, r.median_rs,
                             r.per_fold.size(), r.skipped_folds.size(), r.runtime_seconds);
  }
}

void cmd_generate(RunConfig cfg) {
  cfg.synth.seed = cfg.experiment.seed;
  cfg.synth.bin_width_days = cfg.bin_width_days;
  cfg.synth.validate();
  const auto dir = prepare_output(cfg.output);
  const SynthData data = generate(cfg.synth);
  auto ds = open_out(dir / "dataset.csv");
  write_csv(data.dataset, ds);
  auto held = open_out(dir / "held_out.csv");
  write_csv(data.held_out, held);
  auto truth = open_out(dir / "ground_truth.csv");
  write_ground_truth(data, truth);
  write_echo(cfg, dir);
  std::cout << fmt::format("generated {}x{}x{} tensor: {} observed records, {} held out -> {}\n",
                           cfg.synth.dims.user, cfg.synth.dims.post, cfg.synth.dims.time,
                           data.dataset.records.size(), data.held_out.records.size(),
                           dir.string());
}

void check_methods(const RunConfig& cfg) {
  if (cfg.methods.empty()) throw ConfigError("--methods is empty (valid: mt, av, lr, bg, tmf)");
  for (const auto& m : cfg.methods) make_method(m, cfg.method);
}

void cmd_evaluate(const RunConfig& cfg) {
  check_methods(cfg);
  const Dataset ds = load_dataset(cfg, cfg.input);
  const auto dir = prepare_output(cfg.output);
  write_echo(cfg, dir);
  std::vector<EvalReport> reports;
  for (const auto& name : cfg.methods) {
    reports.push_back(run_experiment(ds, *make_method(name, cfg.method), cfg.experiment));
  }
  write_reports(std::move(reports), dir, true);
}

void cmd_ablate(const RunConfig& cfg) {
  const Dataset ds = load_dataset(cfg, cfg.input);
  const auto dir = prepare_output(cfg.output);
  write_echo(cfg, dir);
  write_reports(run_ablation(ds, cfg.method, cfg.experiment), dir, false);
}

void cmd_predict(const RunConfig& cfg) {
  if (cfg.methods.size() != 1) throw ConfigError("predict takes exactly one method");
  const auto method = make_method(cfg.methods.front(), cfg.method);
  Dataset train = load_dataset(cfg, cfg.input);
  if (cfg.queries.empty()) throw ConfigError("--queries is required");
  Dataset queries = load_dataset(cfg, cfg.queries);
  const auto dir = prepare_output(cfg.output);
  write_echo(cfg, dir);

  Dataset all;
  all.bin_width_days = cfg.bin_width_days;
  all.time_origin = std::min(train.time_origin, queries.time_origin);
  all.records = std::move(train.records);
  std::vector<std::size_t> train_ids(all.records.size()), test_ids(queries.records.size());
  for (std::size_t i = 0; i < train_ids.size(); ++i) train_ids[i] = i;
  for (std::size_t i = 0; i < test_ids.size(); ++i) test_ids[i] = train_ids.size() + i;
  for (auto& r : queries.records) all.records.push_back(std::move(r));
  all.validate();
  const TensorIndex index = index_dataset(all);
  const FoldData fold{all, index, train_ids, test_ids, cfg.experiment.seed};
  const auto pred = method->predict(fold);

  auto out = open_out(dir / "predictions.csv");
  out << "user_id,post_id,time_bin,prediction\n";
  for (std::size_t i = 0; i < test_ids.size(); ++i) {
    const auto& r = all.records[test_ids[i]];
    out << fmt::format("{},{},{},{}\n", r.user_id, r.post_id, all.time_bin(r.share_time), pred[i]);
  }
  std::cout << fmt::format("{} predictions with {} -> {}\n", pred.size(), method->name(),
                           (dir / "predictions.csv").string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale temporal popularity prediction"};
  app.require_subcommand(1);

  std::string config_path;
  std::string input, output, queries, methods;
  std::uint64_t seed = 0;
  std::size_t folds = 0, threads = 0;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Flat JSON config file (dotted keys)");
    sub->add_option("--output", output, "Output directory");
    sub->add_option("--seed", seed, "Seed for every random choice");
    sub->add_option("--threads", threads, "Worker thread cap (0: all cores)");
  };
  const auto data_flags = [&](CLI::App* sub) {
    sub->add_option("--input", input, "Dataset CSV or JSONL");
    sub->add_option("--methods", methods, "Comma-separated: mt, av, lr, bg, tmf");
    sub->add_option("--folds", folds, "Cross-validation folds");
  };
  auto* gen = app.add_subcommand("generate", "Write a synthetic multi-scale dataset");
  common(gen);
  auto* eval = app.add_subcommand("evaluate", "Cross-validated comparison of methods");
  common(eval);
  data_flags(eval);
  auto* abl = app.add_subcommand("ablate", "Time-scale ablation of the multi-scale method");
  common(abl);
  data_flags(abl);
  auto* pred = app.add_subcommand("predict", "Predict popularity of query records");
  common(pred);
  data_flags(pred);
  pred->add_option("--queries", queries, "Records to predict, same schema as --input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) load_config(cfg, config_path);
    CLI::App* sub = app.get_subcommands().front();
    const auto given = [&](const char* flag) { return sub->count(flag) > 0; };
    if (given("--output")) cfg.output = output;
    if (given("--seed")) cfg.experiment.seed = seed;
    if (given("--threads")) cfg.method.mt.solver.threads = threads;
    if (sub != gen) {
      if (given("--input")) cfg.input = input;
      if (given("--methods")) cfg.methods = split(methods, ',');
      if (given("--folds")) cfg.experiment.folds = folds;
    }
    if (sub == pred && given("--queries")) cfg.queries = queries;
    cfg.method.mt.solver.validate();

    if (sub == gen) cmd_generate(cfg);
    else if (sub == eval) cmd_evaluate(cfg);
    else if (sub == abl) cmd_ablate(cfg);
    else cmd_predict(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

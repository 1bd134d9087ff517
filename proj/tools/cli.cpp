#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>

#include "keyauth/harness.hpp"
#include "keyauth/serialization.hpp"
#include "keyauth/synthetic.hpp"

namespace keyauth::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::string data;
  std::string out;
  std::string threshold_method;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> n_impostors;
  bool force = false;
  std::size_t within = 7;
  std::size_t stability_group = 0;
  bool no_simulate = false;
  std::string report;

  // generate
  std::size_t users = 20;
  std::size_t keystrokes = 5000;
  double separability = 3.0;
  std::size_t mechanical = 0;
  std::string format = "jsonl";
};

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

std::size_t env_jobs() {
  const auto v = env("KEYAUTH_JOBS");
  if (v.empty()) return 0;
  try {
    return static_cast<std::size_t>(std::stoul(v));
  } catch (const std::exception&) {
    throw ConfigError("KEYAUTH_JOBS must be a nonnegative integer");
  }
}

// Precedence: config file < environment < flags.
RunConfig resolve(const Options& o, RunConfig base) {
  if (!o.config_path.empty()) base = run_config_from_json(read_json_file(o.config_path), base);
  if (const auto out = env("KEYAUTH_OUT_DIR"); !out.empty()) base.out_dir = out;
  if (const auto jobs = env_jobs(); jobs > 0) base.pipeline.jobs = jobs;
  if (!o.data.empty()) base.dataset = o.data;
  if (!o.out.empty()) base.out_dir = o.out;
  if (!o.threshold_method.empty()) apply_threshold_method(base, o.threshold_method);
  if (o.seed) base.pipeline.seed = *o.seed;
  if (o.jobs) base.pipeline.jobs = *o.jobs;
  if (o.n_impostors) base.pipeline.n_impostors = *o.n_impostors;
  return base;
}

fs::path require_out(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("an output directory is required (--out or KEYAUTH_OUT_DIR)");
  fs::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// The command line minus the job count and output directory, which never
// change results.
Json provenance(const std::vector<std::string>& args, const RunConfig& cfg) {
  Json kept = Json::array();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--jobs" || args[i] == "-j" || args[i] == "--out") {
      ++i;
      continue;
    }
    if (args[i].rfind("--jobs=", 0) == 0 || args[i].rfind("--out=", 0) == 0) continue;
    kept.push_back(args[i]);
  }
  return {{"args", kept}, {"dataset", cfg.dataset}, {"seed", cfg.pipeline.seed}, {"threshold_method", cfg.threshold_method}};
}

struct LoadedData {
  DatasetSplit split;
  std::size_t records = 0;
  std::size_t dropped = 0;
};

LoadedData load_split(const RunConfig& cfg, std::ostream& err) {
  if (cfg.dataset.empty()) throw ConfigError("a dataset is required (--data or \"dataset\" in the config)");
  ParseOptions popts;
  popts.minimum_events = cfg.pipeline.enroll_keystrokes;
  const auto parsed = parse_dataset(cfg.dataset, format_for_path(cfg.dataset), popts);
  for (const auto& w : parsed.warnings) err << "warning: " << w << '\n';
  SplitOptions sopts;
  sopts.enroll_keystrokes = cfg.pipeline.enroll_keystrokes;
  sopts.n_impostors = cfg.pipeline.n_impostors;
  sopts.seed = cfg.pipeline.seed;
  LoadedData out{split_dataset(parsed.streams, sopts), parsed.records, parsed.dropped};
  for (const auto& w : out.split.warnings) err << "warning: " << w << '\n';
  if (out.split.users.size() < 3) throw DataError("at least three usable subjects are required");
  return out;
}

int cmd_generate(const Options& o, std::ostream& out) {
  RunConfig rc = resolve(o, {});
  const auto dir = require_out(rc);
  GeneratorConfig g;
  g.n_users = o.users;
  g.keystrokes_per_session = o.keystrokes;
  g.separability = o.separability;
  g.n_mechanical = o.mechanical;
  g.seed = rc.pipeline.seed;
  const auto data = generate(g);
  const bool csv = o.format == "csv";
  const auto dataset = dir / (csv ? "dataset.csv" : "dataset.jsonl");
  write_text_file(dataset, format_dataset(data.streams, csv ? DatasetFormat::Csv : DatasetFormat::Jsonl));
  write_json_file(dir / "ground_truth.json", to_json(data.truth));
  std::size_t events = 0;
  for (const auto& s : data.streams) events += s.events.size();
  out << "generated " << data.truth.users.size() << " subjects, " << events << " keystrokes -> " << dataset.string()
      << '\n';
  return kOk;
}

int cmd_train(const Options& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig rc = resolve(o, {});
  const auto dir = require_out(rc);
  const auto data = load_split(rc, err);
  const auto model = run_training(data.split, rc.pipeline);
  write_json_file(dir / "model.json", model_to_json(model, rc.pipeline, provenance(args, rc)));
  write_json_file(dir / "split.json", split_manifest(data.split));

  out << "trained " << model.users.size() << " users (" << model.excluded.size() << " excluded, "
      << data.split.excluded.size() << " subjects unusable, " << data.dropped << " malformed records dropped)\n";
  out << "mean training HTER:";
  for (auto m : kAllMethods) out << ' ' << method_name(m) << '=' << fixed(model.summary[static_cast<std::size_t>(m)].fused_hter);
  out << '\n';
  return kOk;
}

struct Evaluation {
  RunConfig rc;
  LoadedModel loaded;
  LoadedData data;
};

Evaluation prepare(const Options& o, std::ostream& err) {
  if (o.model.empty()) throw ConfigError("--model is required");
  Evaluation ev;
  ev.loaded = model_from_json(read_json_file(o.model));
  RunConfig base;
  base.pipeline = ev.loaded.config;
  base.dataset = ev.loaded.provenance.value("dataset", std::string());
  const auto method = ev.loaded.provenance.value("threshold_method", std::string("all"));
  apply_threshold_method(base, method);
  ev.rc = resolve(o, base);
  const auto hash = config_hash(ev.rc.pipeline);
  if (hash != ev.loaded.config_hash) {
    if (!o.force) {
      throw DataError("configuration hash " + hash + " does not match the model's " + ev.loaded.config_hash +
                      " (use --force to override)");
    }
    err << "warning: configuration hash mismatch overridden by --force\n";
  }
  ev.data = load_split(ev.rc, err);
  return ev;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  auto ev = prepare(o, err);
  const auto dir = require_out(ev.rc);
  const auto& cfg = ev.rc.pipeline;
  const auto& model = ev.loaded.model;
  auto report = run_testing(ev.data.split, model, cfg);
  report.day_gap = day_gap_analysis(report, ev.data.split);
  if (!o.no_simulate) report.unauth = simulate_all(ev.data.split, model, cfg);
  if (o.stability_group > 0) {
    report.stability = stability_analysis(ev.data.split, o.stability_group, cfg.seed, default_runner(cfg));
  }

  write_json_file(dir / "report.json", report_to_json(report, cfg));
  write_text_file(dir / "grid.csv", grid_csv(report));
  write_text_file(dir / "fusion.csv", fusion_csv(report, model));
  write_text_file(dir / "per_user.csv", per_user_csv(report));
  write_text_file(dir / "hter_distribution.csv", distribution_csv(report.distribution));
  write_text_file(dir / "day_gap.csv", day_gap_csv(*report.day_gap));
  if (report.unauth) write_text_file(dir / "unauth_histogram.csv", unauth_csv(*report.unauth, cfg.chars_per_second, cfg.window.step));
  if (report.stability) write_text_file(dir / "stability.csv", stability_csv(*report.stability));

  out << "evaluated " << report.users.size() << " users (" << report.skipped.size() << " skipped)\n";
  for (auto m : kAllMethods) {
    const auto& r = report.fused[static_cast<std::size_t>(m)];
    out << method_name(m) << ": FAR=" << fixed(r.far) << " FRR=" << fixed(r.frr) << " HTER=" << fixed(r.hter) << '\n';
  }
  if (report.unauth) out << "flagged within 7 decisions: " << fixed(report.unauth->within(7)) << '\n';
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.within == 0) throw ConfigError("--within must be at least 1");
  auto ev = prepare(o, err);
  const auto dir = require_out(ev.rc);
  const auto& cfg = ev.rc.pipeline;
  const auto summary = simulate_all(ev.data.split, ev.loaded.model, cfg, std::max<std::size_t>(15, o.within));
  write_text_file(dir / "unauth_histogram.csv", unauth_csv(summary, cfg.chars_per_second, cfg.window.step));
  write_json_file(dir / "unauth.json", to_json(summary, cfg.chars_per_second, cfg.window.step));
  out << "transitions " << summary.transitions << " (skipped " << summary.skipped << ", undetected "
      << summary.undetected << ")\n";
  out << "flagged within " << o.within << " decisions (" << o.within * cfg.window.step
      << " keystrokes): " << fixed(summary.within(o.within)) << '\n';
  return kOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  if (o.report.empty()) throw ConfigError("a report.json path is required");
  const auto j = read_json_file(o.report);
  try {
    out << "users evaluated: " << j.at("users_evaluated").get<std::size_t>() << '\n';
    for (const auto& [method, rows] : j.at("grid").items()) {
      out << "\nmean HTER per verifier-feature pair (" << method << " thresholds)\n";
      out << std::left << std::setw(4) << "";
      for (auto f : kAllFamilies) out << std::right << std::setw(9) << family_name(f);
      out << '\n';
      for (const auto& [verifier, row] : rows.items()) {
        out << std::left << std::setw(4) << verifier;
        for (auto f : kAllFamilies) {
          const auto& cell = row.at(std::string(family_name(f)));
          out << std::right << std::setw(9) << (cell.is_null() ? std::string("-") : fixed(cell.get<double>()));
        }
        out << '\n';
      }
      const auto& fused = j.at("fused").at(method);
      out << "fused: HTER=" << fixed(fused.at("after_readjust").at("hter").get<double>())
          << " (before tau readjustment " << fixed(fused.at("before_readjust").at("hter").get<double>()) << ")\n";
    }
    const auto& d = j.at("distribution");
    out << "\nzero-error users: " << fixed(d.at("fraction_zero_error").get<double>()) << "  worst-quintile mean HTER: "
        << fixed(d.at("quintile_means").at(4).get<double>()) << '\n';
    if (j.contains("unauthenticate")) {
      const auto& u = j["unauthenticate"];
      out << "flagged within 7 decisions: " << fixed(u.at("fraction_within").at(6).get<double>()) << " of "
          << u.at("transitions").get<std::size_t>() << " transitions\n";
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keystroke-dynamics active authentication harness", "keyauth"};
  app.set_version_flag("--version", std::string(kArtifactFormat) + " " + std::to_string(kArtifactVersion));
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration");
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--out", o.out, "Output directory (or KEYAUTH_OUT_DIR)");
    sub->add_option("-j,--jobs", o.jobs, "Worker threads (or KEYAUTH_JOBS); 0 = all cores");
  };
  auto pipeline = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "Dataset file (.jsonl or .csv)");
    sub->add_option("--threshold-method", o.threshold_method, "user, population, kchen, or all");
    sub->add_option("--impostors", o.n_impostors, "Impostors per list");
  };

  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset and its ground truth");
  common(gen);
  gen->add_option("--users", o.users, "Regular subjects")->check(CLI::PositiveNumber);
  gen->add_option("--keystrokes", o.keystrokes, "Keystrokes per session")->check(CLI::PositiveNumber);
  gen->add_option("--separability", o.separability, "Between-user spread over within-user spread")->check(CLI::PositiveNumber);
  gen->add_option("--mechanical", o.mechanical, "Additional near-constant typists");
  gen->add_option("--format", o.format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));

  auto* train = app.add_subcommand("train", "Build templates, thresholds, and fusion weights");
  common(train);
  pipeline(train);

  auto* evaluate = app.add_subcommand("evaluate", "Test a model on session-2 data and write reports");
  common(evaluate);
  pipeline(evaluate);
  evaluate->add_option("--model", o.model, "Model artifact")->required();
  evaluate->add_flag("--force", o.force, "Accept a configuration hash mismatch");
  evaluate->add_option("--stability-group", o.stability_group, "Group size for the stability table (0 = skip)");
  evaluate->add_flag("--no-simulate", o.no_simulate, "Skip the impostor-transition simulation");

  auto* simulate = app.add_subcommand("simulate", "Time-to-unauthenticate simulation");
  common(simulate);
  pipeline(simulate);
  simulate->add_option("--model", o.model, "Model artifact")->required();
  simulate->add_flag("--force", o.force, "Accept a configuration hash mismatch");
  simulate->add_option("--within", o.within, "Report the fraction flagged within this many decisions");

  auto* report = app.add_subcommand("report", "Print a summary of an evaluation report");
  report->add_option("report", o.report, "report.json written by evaluate")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(o, out);
    if (train->parsed()) return cmd_train(o, args, out, err);
    if (evaluate->parsed()) return cmd_evaluate(o, out, err);
    if (simulate->parsed()) return cmd_simulate(o, out, err);
    if (report->parsed()) return cmd_report(o, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInvariant;
  }
  return kUsage;
}

}  // namespace keyauth::cli

#include "keyauth/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace keyauth {

namespace {

void require_known(const Json& j, std::initializer_list<std::string_view> keys, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ConfigError("unknown key '" + k + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read(const Json& j, std::string_view key, T& out) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "'");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

Json optional_array(const std::array<std::optional<double>, kPairCount>& a) {
  Json out = Json::array();
  for (const auto& v : a) out.push_back(v ? Json(*v) : Json(nullptr));
  return out;
}

std::array<std::optional<double>, kPairCount> optional_array_from(const Json& j) {
  if (!j.is_array() || j.size() != kPairCount) throw DataError("expected an array of 35 entries");
  std::array<std::optional<double>, kPairCount> out;
  for (std::size_t p = 0; p < kPairCount; ++p) {
    if (!j[p].is_null()) out[p] = j[p].get<double>();
  }
  return out;
}

Json rates_json(const ErrorRates& r) { return {{"far", r.far}, {"frr", r.frr}, {"hter", r.hter}}; }

}  // namespace

Json to_json(const PipelineConfig& cfg) {
  Json verifiers = Json::array(), features = Json::array();
  for (auto v : kAllVerifiers) {
    bool any = false;
    for (auto f : kAllFamilies) any = any || cfg.enabled_pairs[PairId{v, f}.index()];
    if (any) verifiers.push_back(verifier_name(v));
  }
  for (auto f : kAllFamilies) {
    bool any = false;
    for (auto v : kAllVerifiers) any = any || cfg.enabled_pairs[PairId{v, f}.index()];
    if (any) features.push_back(family_name(f));
  }
  Json disabled = Json::array();
  for (std::size_t p = 0; p < kPairCount; ++p) {
    const auto id = PairId::from_index(p);
    const bool listed = std::find(verifiers.begin(), verifiers.end(), verifier_name(id.verifier)) != verifiers.end() &&
                        std::find(features.begin(), features.end(), family_name(id.family)) != features.end();
    if (listed && !cfg.enabled_pairs[p]) disabled.push_back(pair_name(id));
  }
  return {
      {"seed", cfg.seed},
      {"window_size", cfg.window.window_size},
      {"step", cfg.window.step},
      {"enroll_keystrokes", cfg.enroll_keystrokes},
      {"n_impostors", cfg.n_impostors},
      {"primary_method", method_name(cfg.primary_method)},
      {"chars_per_second", cfg.chars_per_second},
      {"verifiers", verifiers},
      {"features", features},
      {"disabled_pairs", disabled},
      {"verifier_params",
       {{"absolute_ratio", cfg.verifier.absolute_ratio},
        {"similarity_tolerance", cfg.verifier.similarity_tolerance},
        {"min_shared", cfg.verifier.min_shared}}},
      {"extraction",
       {{"excluded_keys", cfg.extraction.excluded_keys},
        {"max_hold_ms", cfg.extraction.max_hold_ms},
        {"max_digraph_ms", cfg.extraction.max_digraph_ms}}},
      {"templates",
       {{"min_occurrences", cfg.templates.min_occurrences}, {"spread_floor_ms", cfg.templates.spread_floor_ms}}},
      {"kchen",
       {{"a_min", cfg.kchen.a_min},
        {"a_max", cfg.kchen.a_max},
        {"a_step", cfg.kchen.a_step},
        {"b_min", cfg.kchen.b_min},
        {"b_max", cfg.kchen.b_max},
        {"b_step", cfg.kchen.b_step}}},
      {"spsa",
       {{"iterations", cfg.spsa.iterations},
        {"a", cfg.spsa.a},
        {"A", cfg.spsa.A},
        {"c", cfg.spsa.c},
        {"alpha", cfg.spsa.alpha},
        {"gamma", cfg.spsa.gamma},
        {"seed", cfg.spsa.seed},
        {"tau", cfg.spsa.tau},
        {"first_step", cfg.spsa.first_step},
        {"calibration_samples", cfg.spsa.calibration_samples}}},
      {"unauth", {{"genuine_block", cfg.unauth.genuine_block}, {"impostor_block", cfg.unauth.impostor_block}}},
  };
}

PipelineConfig pipeline_from_json(const Json& j, PipelineConfig cfg) {
  require_known(j,
                {"seed", "window_size", "step", "enroll_keystrokes", "n_impostors", "primary_method",
                 "chars_per_second", "verifiers", "features", "disabled_pairs", "verifier_params", "extraction",
                 "templates", "kchen", "spsa", "unauth", "jobs"},
                "pipeline config");
  read(j, "seed", cfg.seed);
  read(j, "window_size", cfg.window.window_size);
  read(j, "step", cfg.window.step);
  read(j, "enroll_keystrokes", cfg.enroll_keystrokes);
  read(j, "n_impostors", cfg.n_impostors);
  read(j, "chars_per_second", cfg.chars_per_second);
  read(j, "jobs", cfg.jobs);
  if (j.contains("primary_method")) {
    const auto m = parse_method(j["primary_method"].get<std::string>());
    if (!m) throw ConfigError("unknown primary_method");
    cfg.primary_method = *m;
  }

  if (j.contains("verifiers") || j.contains("features") || j.contains("disabled_pairs")) {
    std::set<VerifierId> verifiers(kAllVerifiers.begin(), kAllVerifiers.end());
    std::set<FeatureFamily> features(kAllFamilies.begin(), kAllFamilies.end());
    if (j.contains("verifiers")) {
      verifiers.clear();
      for (const auto& name : j["verifiers"]) {
        const auto v = parse_verifier(name.get<std::string>());
        if (!v) throw ConfigError("unknown verifier " + name.dump());
        verifiers.insert(*v);
      }
    }
    if (j.contains("features")) {
      features.clear();
      for (const auto& name : j["features"]) {
        const auto f = parse_family(name.get<std::string>());
        if (!f) throw ConfigError("unknown feature " + name.dump());
        features.insert(*f);
      }
    }
    for (std::size_t p = 0; p < kPairCount; ++p) {
      const auto id = PairId::from_index(p);
      cfg.enabled_pairs[p] = verifiers.count(id.verifier) && features.count(id.family);
    }
    if (j.contains("disabled_pairs")) {
      for (const auto& name : j["disabled_pairs"]) {
        bool found = false;
        for (std::size_t p = 0; p < kPairCount; ++p) {
          if (pair_name(PairId::from_index(p)) == name.get<std::string>()) {
            cfg.enabled_pairs[p] = false;
            found = true;
          }
        }
        if (!found) throw ConfigError("unknown pair " + name.dump());
      }
    }
  }

  if (j.contains("verifier_params")) {
    const auto& v = j["verifier_params"];
    require_known(v, {"absolute_ratio", "similarity_tolerance", "min_shared"}, "verifier_params");
    read(v, "absolute_ratio", cfg.verifier.absolute_ratio);
    read(v, "similarity_tolerance", cfg.verifier.similarity_tolerance);
    read(v, "min_shared", cfg.verifier.min_shared);
  }
  if (j.contains("extraction")) {
    const auto& e = j["extraction"];
    require_known(e, {"excluded_keys", "max_hold_ms", "max_digraph_ms"}, "extraction");
    read(e, "excluded_keys", cfg.extraction.excluded_keys);
    read(e, "max_hold_ms", cfg.extraction.max_hold_ms);
    read(e, "max_digraph_ms", cfg.extraction.max_digraph_ms);
  }
  if (j.contains("templates")) {
    const auto& t = j["templates"];
    require_known(t, {"min_occurrences", "spread_floor_ms"}, "templates");
    read(t, "min_occurrences", cfg.templates.min_occurrences);
    read(t, "spread_floor_ms", cfg.templates.spread_floor_ms);
  }
  if (j.contains("kchen")) {
    const auto& k = j["kchen"];
    require_known(k, {"a_min", "a_max", "a_step", "b_min", "b_max", "b_step"}, "kchen");
    read(k, "a_min", cfg.kchen.a_min);
    read(k, "a_max", cfg.kchen.a_max);
    read(k, "a_step", cfg.kchen.a_step);
    read(k, "b_min", cfg.kchen.b_min);
    read(k, "b_max", cfg.kchen.b_max);
    read(k, "b_step", cfg.kchen.b_step);
  }
  if (j.contains("spsa")) {
    const auto& s = j["spsa"];
    require_known(s,
                  {"iterations", "a", "A", "c", "alpha", "gamma", "seed", "tau", "first_step", "calibration_samples"},
                  "spsa");
    read(s, "iterations", cfg.spsa.iterations);
    read(s, "a", cfg.spsa.a);
    read(s, "A", cfg.spsa.A);
    read(s, "c", cfg.spsa.c);
    read(s, "alpha", cfg.spsa.alpha);
    read(s, "gamma", cfg.spsa.gamma);
    read(s, "seed", cfg.spsa.seed);
    read(s, "tau", cfg.spsa.tau);
    read(s, "first_step", cfg.spsa.first_step);
    read(s, "calibration_samples", cfg.spsa.calibration_samples);
  }
  if (j.contains("unauth")) {
    const auto& u = j["unauth"];
    require_known(u, {"genuine_block", "impostor_block"}, "unauth");
    read(u, "genuine_block", cfg.unauth.genuine_block);
    read(u, "impostor_block", cfg.unauth.impostor_block);
  }

  cfg.templates.minimum_events = cfg.enroll_keystrokes;
  try {
    cfg.window.validate();
    cfg.kchen.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.enroll_keystrokes == 0) throw ConfigError("enroll_keystrokes must be positive");
  if (!(cfg.chars_per_second > 0.0)) throw ConfigError("chars_per_second must be positive");
  if (!(cfg.spsa.tau >= 0.0 && cfg.spsa.tau <= 1.0)) throw ConfigError("spsa tau must lie in [0, 1]");
  return cfg;
}

Json to_json(const RunConfig& cfg) {
  Json j = to_json(cfg.pipeline);
  Json out = {{"dataset", cfg.dataset}, {"out", cfg.out_dir}, {"threshold_method", cfg.threshold_method}};
  out.update(j);
  return out;
}

void apply_threshold_method(RunConfig& cfg, const std::string& name) {
  if (name == "all") {
    cfg.pipeline.primary_method = ThresholdMethod::UserSpecific;
  } else if (const auto m = parse_method(name)) {
    cfg.pipeline.primary_method = *m;
  } else {
    throw ConfigError("unknown threshold method '" + name + "' (expected user, population, kchen, or all)");
  }
  cfg.threshold_method = name;
}

RunConfig run_config_from_json(const Json& j, RunConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  Json pipeline = Json::object();
  for (const auto& [k, v] : j.items()) {
    if (k == "dataset") {
      read(j, "dataset", base.dataset);
    } else if (k == "out") {
      read(j, "out", base.out_dir);
    } else if (k == "threshold_method") {
      std::string name;
      read(j, "threshold_method", name);
      apply_threshold_method(base, name);
    } else {
      pipeline[k] = v;
    }
  }
  base.pipeline = pipeline_from_json(pipeline, base.pipeline);
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    return run_config_from_json(read_json_file(path));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

std::string config_hash(const PipelineConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(cfg).dump())));
  return buf;
}

Json to_json(const Template& tmpl) {
  Json families = Json::object();
  for (auto f : kAllFamilies) {
    Json rows = Json::array();
    for (const auto& [key, s] : tmpl.family(f)) rows.push_back({key.first, key.second, s.mean, s.std, s.mad, s.count});
    families[std::string(family_name(f))] = std::move(rows);
  }
  return {{"subject_id", tmpl.subject_id}, {"families", families}};
}

Template template_from_json(const Json& j) {
  Template t;
  t.subject_id = j.at("subject_id").get<std::string>();
  for (const auto& [name, rows] : j.at("families").items()) {
    const auto f = parse_family(name);
    if (!f) throw DataError("unknown feature family in template: " + name);
    auto& fam = t.families[index_of(*f)];
    for (const auto& r : rows) {
      FeatureKey key{*f, r.at(0).get<std::string>(), r.at(1).get<std::string>()};
      fam[key] = FeatureStats{r.at(2).get<double>(), r.at(3).get<double>(), r.at(4).get<double>(),
                              r.at(5).get<std::size_t>()};
    }
  }
  return t;
}

Json model_to_json(const TrainedModel& model, const PipelineConfig& cfg, const Json& provenance) {
  Json users = Json::array();
  for (const auto& u : model.users) {
    Json thresholds = Json::object();
    for (auto m : kAllMethods) thresholds[std::string(method_name(m))] = optional_array(u.thresholds_for(m));
    users.push_back({{"subject_id", u.subject_id}, {"template", to_json(u.tmpl)}, {"thresholds", thresholds}});
  }
  Json kchen = Json::array();
  for (const auto& k : model.kchen) kchen.push_back(k ? Json{{"a", k->a}, {"b", k->b}} : Json(nullptr));
  Json fusion = Json::object(), summary = Json::object();
  for (auto m : kAllMethods) {
    const auto mi = static_cast<std::size_t>(m);
    const auto& f = model.fusion[mi];
    fusion[std::string(method_name(m))] = {{"weights", f.weights}, {"tau", f.tau}, {"spsa_tau", f.spsa.tau}};
    summary[std::string(method_name(m))] = {{"fused_hter", model.summary[mi].fused_hter},
                                            {"fused_hter_before_readjust", model.summary[mi].fused_hter_before_readjust},
                                            {"pair_hter", optional_array(model.summary[mi].pair_hter)}};
  }
  Json pairs = Json::array();
  for (std::size_t p = 0; p < kPairCount; ++p) pairs.push_back(pair_name(PairId::from_index(p)));
  return {
      {"format", kArtifactFormat},
      {"version", kArtifactVersion},
      {"config_hash", config_hash(cfg)},
      {"config", to_json(cfg)},
      {"provenance", provenance},
      {"pairs", pairs},
      {"population_thresholds", optional_array(model.population)},
      {"kchen_params", kchen},
      {"fusion", fusion},
      {"training_summary", summary},
      {"excluded", model.excluded},
      {"users", users},
  };
}

LoadedModel model_from_json(const Json& j) {
  try {
    if (j.value("format", std::string()) != kArtifactFormat) throw DataError("not a model artifact");
    const int version = j.at("version").get<int>();
    if (version != kArtifactVersion) {
      throw DataError("unsupported model artifact version " + std::to_string(version));
    }
    LoadedModel out;
    out.config = pipeline_from_json(j.at("config"));
    out.config_hash = j.at("config_hash").get<std::string>();
    out.provenance = j.value("provenance", Json::object());
    auto& m = out.model;
    m.population = optional_array_from(j.at("population_thresholds"));
    const auto& kchen = j.at("kchen_params");
    for (std::size_t p = 0; p < kPairCount; ++p) {
      if (!kchen.at(p).is_null()) m.kchen[p] = KChenParams{kchen[p].at("a").get<double>(), kchen[p].at("b").get<double>()};
    }
    for (auto method : kAllMethods) {
      const auto mi = static_cast<std::size_t>(method);
      const auto name = std::string(method_name(method));
      const auto& f = j.at("fusion").at(name);
      m.fusion[mi].weights = f.at("weights").get<Weights>();
      m.fusion[mi].tau = f.at("tau").get<double>();
      m.fusion[mi].spsa = out.config.spsa;
      m.fusion[mi].spsa.tau = f.at("spsa_tau").get<double>();
      const auto& s = j.at("training_summary").at(name);
      m.summary[mi].fused_hter = s.at("fused_hter").get<double>();
      m.summary[mi].fused_hter_before_readjust = s.at("fused_hter_before_readjust").get<double>();
      m.summary[mi].pair_hter = optional_array_from(s.at("pair_hter"));
    }
    m.excluded = j.at("excluded").get<std::vector<std::string>>();
    for (const auto& u : j.at("users")) {
      UserModel um;
      um.subject_id = u.at("subject_id").get<std::string>();
      um.tmpl = template_from_json(u.at("template"));
      for (auto method : kAllMethods) {
        um.thresholds[static_cast<std::size_t>(method)] =
            optional_array_from(u.at("thresholds").at(std::string(method_name(method))));
      }
      m.users.push_back(std::move(um));
    }
    std::sort(m.users.begin(), m.users.end(),
              [](const UserModel& a, const UserModel& b) { return a.subject_id < b.subject_id; });
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model artifact: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("model artifact has an invalid config: ") + e.what());
  }
}

Json split_manifest(const DatasetSplit& split) {
  Json users = Json::array();
  for (const auto& u : split.users) {
    Json entry = {{"subject_id", u.subject_id},
                  {"session1_keystrokes", u.session1.events.size()},
                  {"session2_keystrokes", u.session2.events.size()},
                  {"enrollment_keystrokes", split.enrollment(u).size()},
                  {"tuning_keystrokes", split.tuning(u).size()}};
    if (const auto it = split.impostors.find(u.subject_id); it != split.impostors.end()) {
      entry["training_impostors"] = it->second.training;
      entry["testing_impostors"] = it->second.testing;
    }
    users.push_back(std::move(entry));
  }
  return {{"seed", split.seed},
          {"enroll_keystrokes", split.enroll_keystrokes},
          {"impostors_per_list", split.impostors_per_list},
          {"requested_impostors", split.requested_impostors},
          {"excluded", split.excluded},
          {"warnings", split.warnings},
          {"users", users}};
}

Json to_json(const GroundTruth& truth) {
  Json users = Json::array();
  for (const auto& u : truth.users) {
    users.push_back({{"subject_id", u.subject_id},
                     {"mechanical", u.mechanical},
                     {"within_std_ms", u.within_std_ms},
                     {"hold_mean_ms", u.hold_mean},
                     {"interkey_mean_ms", u.interkey_mean},
                     {"session2_scale", u.session2_scale},
                     {"session2_shift_ms", u.session2_shift_ms}});
  }
  return {{"users", users}};
}

Json to_json(const UnauthSummary& s, double chars_per_second, std::size_t step) {
  Json hist = Json::array();
  for (std::size_t d = 0; d < s.histogram.size(); ++d) {
    hist.push_back({{"decisions", d + 1},
                    {"keystrokes", (d + 1) * step},
                    {"seconds", static_cast<double>((d + 1) * step) / chars_per_second},
                    {"count", s.histogram[d]}});
  }
  return {{"transitions", s.transitions},
          {"undetected", s.undetected},
          {"skipped", s.skipped},
          {"histogram", hist},
          {"fraction_within", s.fraction_within}};
}

Json report_to_json(const EvaluationReport& report, const PipelineConfig& cfg) {
  Json grid = Json::object(), fused = Json::object();
  for (auto m : kAllMethods) {
    const auto mi = static_cast<std::size_t>(m);
    Json rows = Json::object();
    for (auto v : kAllVerifiers) {
      Json row = Json::object();
      for (auto f : kAllFamilies) {
        const auto& cell = report.grid[mi][PairId{v, f}.index()];
        row[std::string(family_name(f))] = cell ? Json(*cell) : Json(nullptr);
      }
      rows[std::string(verifier_name(v))] = row;
    }
    grid[std::string(method_name(m))] = rows;
    fused[std::string(method_name(m))] = {{"after_readjust", rates_json(report.fused[mi])},
                                          {"before_readjust", rates_json(report.fused_before_readjust[mi])}};
  }
  Json users = Json::array();
  for (const auto& u : report.users) {
    Json entry = {{"subject_id", u.subject_id},
                  {"genuine_windows", u.genuine_windows},
                  {"impostor_windows", u.impostor_windows}};
    for (auto m : kAllMethods) {
      entry[std::string(method_name(m))] = rates_json(u.fused[static_cast<std::size_t>(m)]);
    }
    users.push_back(std::move(entry));
  }
  const auto& d = report.distribution;
  Json out = {{"primary_method", method_name(report.primary)},
              {"users_evaluated", report.users.size()},
              {"skipped", report.skipped},
              {"fused", fused},
              {"grid", grid},
              {"distribution",
               {{"quantile_levels", d.quantile_levels},
                {"quantiles", d.quantiles},
                {"quintile_means", d.quintile_means},
                {"quintile_max", d.quintile_max},
                {"worst_quintile", d.worst_quintile},
                {"mean", d.mean},
                {"fraction_zero_error", d.fraction_zero_error},
                {"fraction_below_mean", d.fraction_below_mean},
                {"above_0_10", d.above_0_10},
                {"above_0_15", d.above_0_15}}},
              {"users", users}};
  if (report.unauth) out["unauthenticate"] = to_json(*report.unauth, cfg.chars_per_second, cfg.window.step);
  if (report.stability) {
    const auto& t = *report.stability;
    Json rows = Json::array();
    for (const auto& r : t.rows) {
      rows.push_back({{"group_size", r.group_size},
                      {"group_hter", r.group_hter},
                      {"cumulative_size", r.cumulative_size},
                      {"cumulative_hter", r.cumulative_hter},
                      {"cumulative_weighted_hter", r.cumulative_weighted_hter}});
    }
    out["stability"] = {{"rows", rows},
                        {"full_hter", t.full_hter},
                        {"group_mean", t.group_mean},
                        {"group_std", t.group_std},
                        {"group_net_deviation", t.group_net_deviation},
                        {"cumulative_std", t.cumulative_std},
                        {"cumulative_net_deviation", t.cumulative_net_deviation}};
  }
  if (report.day_gap) {
    Json buckets = Json::array();
    for (const auto& b : report.day_gap->buckets) {
      buckets.push_back(
          {{"gap_days", b.gap_days}, {"users", b.users}, {"mean_accuracy", b.mean_accuracy}, {"low_n", b.low_n}});
    }
    out["day_gap"] = {{"buckets", buckets}, {"excluded", report.day_gap->excluded}};
  }
  return out;
}

std::string grid_csv(const EvaluationReport& report) {
  std::ostringstream os;
  os << "method,verifier";
  for (auto f : kAllFamilies) os << ',' << family_name(f);
  os << '\n';
  for (auto m : kAllMethods) {
    for (auto v : kAllVerifiers) {
      os << method_name(m) << ',' << verifier_name(v);
      for (auto f : kAllFamilies) os << ',' << fmt(report.grid[static_cast<std::size_t>(m)][PairId{v, f}.index()]);
      os << '\n';
    }
  }
  return os.str();
}

std::string fusion_csv(const EvaluationReport& report, const TrainedModel& model) {
  std::ostringstream os;
  os << "method,far,frr,hter,far_before_readjust,frr_before_readjust,hter_before_readjust,tau,spsa_tau\n";
  for (auto m : kAllMethods) {
    const auto mi = static_cast<std::size_t>(m);
    const auto& a = report.fused[mi];
    const auto& b = report.fused_before_readjust[mi];
    os << method_name(m) << ',' << fmt(a.far) << ',' << fmt(a.frr) << ',' << fmt(a.hter) << ',' << fmt(b.far) << ','
       << fmt(b.frr) << ',' << fmt(b.hter) << ',' << fmt(model.fusion[mi].tau) << ',' << fmt(model.fusion[mi].spsa.tau)
       << '\n';
  }
  return os.str();
}

std::string per_user_csv(const EvaluationReport& report) {
  std::ostringstream os;
  os << "subject_id,genuine_windows,impostor_windows";
  for (auto m : kAllMethods) os << ',' << method_name(m) << "_far," << method_name(m) << "_frr," << method_name(m) << "_hter";
  os << '\n';
  for (const auto& u : report.users) {
    os << u.subject_id << ',' << u.genuine_windows << ',' << u.impostor_windows;
    for (const auto& r : u.fused) os << ',' << fmt(r.far) << ',' << fmt(r.frr) << ',' << fmt(r.hter);
    os << '\n';
  }
  return os.str();
}

std::string distribution_csv(const HterDistribution& d) {
  std::ostringstream os;
  os << "statistic,level,value\n";
  for (std::size_t i = 0; i < d.quantiles.size(); ++i) os << "quantile," << fmt(d.quantile_levels[i]) << ',' << fmt(d.quantiles[i]) << '\n';
  for (std::size_t q = 0; q < 5; ++q) os << "quintile_mean," << q + 1 << ',' << fmt(d.quintile_means[q]) << '\n';
  for (std::size_t q = 0; q < 5; ++q) os << "quintile_max," << q + 1 << ',' << fmt(d.quintile_max[q]) << '\n';
  os << "mean,," << fmt(d.mean) << '\n';
  os << "fraction_zero_error,," << fmt(d.fraction_zero_error) << '\n';
  os << "fraction_below_mean,," << fmt(d.fraction_below_mean) << '\n';
  os << "users_above,0.10," << d.above_0_10 << '\n';
  os << "users_above,0.15," << d.above_0_15 << '\n';
  return os.str();
}

std::string unauth_csv(const UnauthSummary& s, double chars_per_second, std::size_t step) {
  std::ostringstream os;
  os << "decisions,keystrokes,seconds,count,cumulative_fraction\n";
  for (std::size_t d = 0; d < s.histogram.size(); ++d) {
    const std::size_t keys = (d + 1) * step;
    os << d + 1 << ',' << keys << ',' << fmt(static_cast<double>(keys) / chars_per_second) << ',' << s.histogram[d]
       << ',' << fmt(s.within(d + 1)) << '\n';
  }
  os << "undetected,,," << s.undetected << ",\n";
  return os.str();
}

std::string stability_csv(const StabilityTable& t) {
  std::ostringstream os;
  os << "group,group_size,group_hter,cumulative_size,cumulative_hter,cumulative_weighted_hter\n";
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    os << i + 1 << ',' << r.group_size << ',' << fmt(r.group_hter) << ',' << r.cumulative_size << ','
       << fmt(r.cumulative_hter) << ',' << fmt(r.cumulative_weighted_hter) << '\n';
  }
  os << "std,," << fmt(t.group_std) << ",," << fmt(t.cumulative_std) << ",\n";
  os << "net_deviation,," << fmt(t.group_net_deviation) << ",," << fmt(t.cumulative_net_deviation) << ",\n";
  return os.str();
}

std::string day_gap_csv(const DayGapAnalysis& d) {
  std::ostringstream os;
  os << "gap_days,users,mean_accuracy,low_n\n";
  for (const auto& b : d.buckets) {
    os << b.gap_days << ',' << b.users << ',' << fmt(b.mean_accuracy) << ',' << (b.low_n ? "true" : "false") << '\n';
  }
  return os.str();
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace keyauth

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "demoscore/pipeline.hpp"

namespace demoscore {

inline nlohmann::json stats_to_json(const SuccessStats& s) {
  return nlohmann::json{{"n", s.n},           {"successes", s.successes},
                        {"success_rate", s.p_hat}, {"wilson_lo", s.lo},
                        {"wilson_hi", s.hi},  {"fractional", s.fractional}};
}

inline nlohmann::json policy_eval_to_json(const PolicyEval& p) {
  return nlohmann::json{{"best", stats_to_json(p.best)},
                        {"final", stats_to_json(p.final)},
                        {"best_checkpoint", p.best_checkpoint},
                        {"selection_curve", p.selection_curve}};
}

inline nlohmann::json replicate_to_json(const ReplicateResult& r) {
  nlohmann::json j{{"seed", r.seed},
                   {"base", policy_eval_to_json(r.base)},
                   {"final", policy_eval_to_json(r.final)},
                   {"initial_curve", r.initial_curve},
                   {"initial_curve_n", r.initial_curve_n},
                   {"episodes",
                    {{"rollouts", r.episodes_rollouts},
                     {"eval", r.episodes_eval},
                     {"total", r.episodes_total}}},
                   {"retrain_dataset_size", r.retrain_dataset_size},
                   {"timings_s", r.timings_s}};
  if (r.has_curation) j["curation"] = curation_to_json(r.curation);
  if (!r.ood.empty()) {
    nlohmann::json ood = nlohmann::json::array();
    for (const auto& o : r.ood)
      ood.push_back({{"expansion", o.expansion},
                     {"base", stats_to_json(o.base)},
                     {"final", stats_to_json(o.final)}});
    j["ood"] = ood;
  }
  return j;
}

inline nlohmann::json report_to_json(const Report& r) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& rep : r.replicates) reps.push_back(replicate_to_json(rep));
  return nlohmann::json{{"schema_version", r.schema_version},
                        {"method", r.method},
                        {"variant", r.variant},
                        {"mixture", r.mixture_label},
                        {"config", r.config_echo},
                        {"replicates", reps},
                        {"pooled_base", stats_to_json(r.pooled_base)},
                        {"pooled_final", stats_to_json(r.pooled_final)}};
}

namespace detail {

// CSV numbers are fixed at 6 significant digits so files are stable
// across runs.
inline std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace detail

// Writes report.json plus the three CSV views. All outputs are
// deterministic functions of the reports (timings live only in the JSON).
inline void emit_report(const std::vector<Report>& reports, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json all = nlohmann::json::array();
  for (const auto& r : reports) all.push_back(report_to_json(r));
  detail::write_file(dir + "/report.json", all.dump(2) + "\n");

  std::string summary = "method,variant,mixture,scope,policy,n,successes,success_rate,wilson_lo,wilson_hi\n";
  auto add_row = [&summary](const Report& r, const std::string& scope, const std::string& policy,
                            const SuccessStats& s) {
    summary += r.method + "," + r.variant + "," + r.mixture_label + "," + scope + "," + policy +
               "," + std::to_string(s.n) + "," + detail::csv_num(s.successes) + "," +
               detail::csv_num(s.p_hat) + "," + detail::csv_num(s.lo) + "," +
               detail::csv_num(s.hi) + "\n";
  };
  for (const auto& r : reports) {
    for (const auto& rep : r.replicates) {
      const std::string scope = "seed:" + std::to_string(rep.seed);
      add_row(r, scope, "base", rep.base.best);
      add_row(r, scope, "final", rep.final.best);
      add_row(r, scope, "final_last_ckpt", rep.final.final);
    }
    add_row(r, "pooled", "base", r.pooled_base);
    add_row(r, "pooled", "final", r.pooled_final);
  }
  detail::write_file(dir + "/summary.csv", summary);

  std::string comp = "method,variant,mixture,seed,tag,kept,discarded\n";
  for (const auto& r : reports)
    for (const auto& rep : r.replicates) {
      if (!rep.has_curation) continue;
      for (const auto& [tag, counts] : rep.curation.per_tag)
        comp += r.method + "," + r.variant + "," + r.mixture_label + "," +
                std::to_string(rep.seed) + "," + tag + "," + std::to_string(counts.first) + "," +
                std::to_string(counts.second) + "\n";
    }
  detail::write_file(dir + "/composition.csv", comp);

  std::string plot = "method,variant,mixture,seed,checkpoint,success_rate,n\n";
  for (const auto& r : reports)
    for (const auto& rep : r.replicates)
      for (std::size_t i = 0; i < rep.initial_curve.size(); ++i)
        plot += r.method + "," + r.variant + "," + r.mixture_label + "," +
                std::to_string(rep.seed) + "," + std::to_string(i + 1) + "," +
                detail::csv_num(rep.initial_curve[i]) + "," +
                std::to_string(i < rep.initial_curve_n.size() ? rep.initial_curve_n[i] : 0) +
                "\n";
  detail::write_file(dir + "/plotdata.csv", plot);
}

inline nlohmann::json calibration_to_json(const CalibrationSummary& s) {
  return nlohmann::json{
      {"demo_trials", s.env_report.trials},
      {"wide_first_attempt_rate", s.env_report.wide_first_attempt_rate},
      {"narrow_first_attempt_rate", s.env_report.narrow_first_attempt_rate},
      {"narrow_clearance", s.env_report.narrow_clearance},
      {"wide_clearance", s.env_report.wide_clearance},
      {"wide_policy_success", s.wide_policy_success},
      {"narrow_policy_success", s.narrow_policy_success},
      {"demo_band_ok", s.demo_band_ok},
      {"wide_band_ok", s.wide_band_ok},
      {"narrow_band_ok", s.narrow_band_ok},
      {"passed", s.passed}};
}

}  // namespace demoscore

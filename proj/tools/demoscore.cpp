// Command-line front end: run a method, run an ablation suite, calibrate
// the environment, or regenerate CSV views from a saved report.
//
// Exit codes: 0 success, 2 configuration error, 3 degenerate filter.
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "demoscore/config.hpp"
#include "demoscore/pipeline.hpp"
#include "demoscore/report.hpp"

using namespace demoscore;

namespace {

void print_report_summary(const Report& r) {
  const std::string label = r.variant.empty() ? r.method : r.method + "/" + r.variant;
  std::printf("%s on %s\n", label.c_str(), r.mixture_label.c_str());
  long episodes = 0;
  for (const auto& rep : r.replicates) {
    std::printf("  seed %llu: base %.3f [%.3f, %.3f]  final %.3f [%.3f, %.3f]  (ckpt %d, %ld episodes)\n",
                (unsigned long long)rep.seed, rep.base.best.p_hat, rep.base.best.lo,
                rep.base.best.hi, rep.final.best.p_hat, rep.final.best.lo, rep.final.best.hi,
                rep.final.best_checkpoint, rep.episodes_total);
    episodes += rep.episodes_total;
  }
  std::printf("  pooled: base %.3f [%.3f, %.3f]  final %.3f [%.3f, %.3f]\n",
              r.pooled_base.p_hat, r.pooled_base.lo, r.pooled_base.hi, r.pooled_final.p_hat,
              r.pooled_final.lo, r.pooled_final.hi);
  std::printf("  environment episodes consumed: %ld\n", episodes);
}

int run_command(const std::string& config_path, const std::string& method_override,
                const std::string& out_override, bool resume) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!method_override.empty()) cfg.method = method_from_string(method_override);
  if (!out_override.empty()) cfg.out_dir = out_override;
  cfg.resume = resume;
  Report report = run_method(cfg);
  emit_report({report}, cfg.out_dir);
  print_report_summary(report);
  std::printf("wrote %s/report.json\n", cfg.out_dir.c_str());
  return 0;
}

int ablate_command(const std::string& config_path, const std::string& suite,
                   const std::string& out_override, bool resume) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  cfg.resume = resume;
  std::vector<Report> reports = run_ablation_suite(cfg, suite);
  emit_report(reports, cfg.out_dir);
  for (const auto& r : reports) print_report_summary(r);
  std::printf("wrote %s/report.json\n", cfg.out_dir.c_str());
  return 0;
}

int calibrate_command(const std::string& config_path, const std::string& out_override) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  CalibrationSummary sum = run_calibration(cfg);
  std::printf("demonstrator first-attempt rates over %d trials: wide %.4f narrow %.4f (%s)\n",
              sum.env_report.trials, sum.env_report.wide_first_attempt_rate,
              sum.env_report.narrow_first_attempt_rate, sum.demo_band_ok ? "ok" : "BELOW 0.99");
  std::printf("gap clearances: narrow %.4f wide %.4f\n", sum.env_report.narrow_clearance,
              sum.env_report.wide_clearance);
  auto print_band = [](const char* name, const std::vector<double>& v, bool ok) {
    std::printf("%s policy success per seed:", name);
    for (double x : v) std::printf(" %.3f", x);
    std::printf(" (%s)\n", ok ? "ok" : "OUT OF BAND");
  };
  print_band("pure-wide", sum.wide_policy_success, sum.wide_band_ok);
  print_band("pure-narrow", sum.narrow_policy_success, sum.narrow_band_ok);
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream(cfg.out_dir + "/calibration.json") << calibration_to_json(sum).dump(2) << "\n";
  std::printf("calibration %s; wrote %s/calibration.json\n", sum.passed ? "PASSED" : "FAILED",
              cfg.out_dir.c_str());
  return sum.passed ? 0 : 1;
}

int report_command(const std::string& in_dir) {
  std::ifstream f(in_dir + "/report.json");
  if (!f) throw ConfigError("no report.json in " + in_dir);
  nlohmann::json all;
  f >> all;
  // regenerate the CSV views from the stored JSON
  std::vector<Report> reports;
  for (const auto& j : all) {
    Report r;
    r.method = j.value("method", "");
    r.variant = j.value("variant", "");
    r.mixture_label = j.value("mixture", "");
    r.config_echo = j.value("config", nlohmann::json::object());
    auto stats_from = [](const nlohmann::json& s) {
      SuccessStats st;
      st.n = s.value("n", 0);
      st.successes = s.value("successes", 0.0);
      st.p_hat = s.value("success_rate", 0.0);
      st.lo = s.value("wilson_lo", 0.0);
      st.hi = s.value("wilson_hi", 0.0);
      st.fractional = s.value("fractional", false);
      return st;
    };
    for (const auto& rj : j.at("replicates")) {
      ReplicateResult rep;
      rep.seed = rj.value("seed", 0ull);
      rep.base.best = stats_from(rj.at("base").at("best"));
      rep.base.final = stats_from(rj.at("base").at("final"));
      rep.final.best = stats_from(rj.at("final").at("best"));
      rep.final.final = stats_from(rj.at("final").at("final"));
      rep.final.best_checkpoint = rj.at("final").value("best_checkpoint", 0);
      rep.initial_curve = rj.value("initial_curve", std::vector<double>{});
      rep.initial_curve_n = rj.value("initial_curve_n", std::vector<int>{});
      if (rj.contains("curation")) {
        rep.has_curation = true;
        const auto& c = rj.at("curation");
        rep.curation.gamma = c.value("gamma", 0.0);
        rep.curation.chosen_checkpoint = c.value("chosen_ckpt", 0);
        if (c.contains("diagnostics") && c.at("diagnostics").contains("per_tag"))
          for (const auto& [tag, counts] : c.at("diagnostics").at("per_tag").items())
            rep.curation.per_tag[tag] = {counts.value("kept", 0), counts.value("discarded", 0)};
      }
      r.replicates.push_back(std::move(rep));
    }
    r.pooled_base = stats_from(j.at("pooled_base"));
    r.pooled_final = stats_from(j.at("pooled_final"));
    reports.push_back(std::move(r));
  }
  emit_report(reports, in_dir);
  std::printf("regenerated CSVs in %s\n", in_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demonstration curation by rollout-trained success classifiers"};
  app.require_subcommand(1);

  std::string config_path, method_override, out_override, suite = "design", in_dir;
  bool resume = false;

  CLI::App* run = app.add_subcommand("run", "run one method end to end");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--method", method_override,
                  "demo_score | base | auto_il | rcp | loss_weighting");
  run->add_option("--out", out_override, "output directory override");
  run->add_flag("--resume", resume, "reuse on-disk checkpoints and rollouts");

  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation suite");
  ablate->add_option("--config", config_path, "experiment config JSON")->required();
  ablate->add_option("--suite", suite, "design | budget | size | all | <variant>");
  ablate->add_option("--out", out_override, "output directory override");
  ablate->add_flag("--resume", resume, "reuse on-disk checkpoints and rollouts");

  CLI::App* calib = app.add_subcommand("calibrate", "certify the environment asymmetry");
  calib->add_option("--config", config_path, "experiment config JSON")->required();
  calib->add_option("--out", out_override, "output directory override");

  CLI::App* rep = app.add_subcommand("report", "regenerate CSVs from report.json");
  rep->add_option("--in", in_dir, "directory holding report.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, method_override, out_override, resume);
    if (ablate->parsed()) return ablate_command(config_path, suite, out_override, resume);
    if (calib->parsed()) return calibrate_command(config_path, out_override);
    if (rep->parsed()) return report_command(in_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DegenerateFilterError& e) {
    std::fprintf(stderr, "degenerate filter: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

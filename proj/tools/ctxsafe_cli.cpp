// Copyright 2026 The ctxsafe Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// ctxsafe command line: run-loop, sensitivity, logistic-bounds, mmd-demo, classify.
// Exit codes: 0 success, 2 config/input error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ctxsafe/errors.hpp"
#include "ctxsafe/harness.hpp"
#include "ctxsafe/simd/kernels.hpp"

namespace fs = std::filesystem;
using namespace ctxsafe;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string num(double v) { return format_real(v); }

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
  return out;
}

std::string_view path_name(DecisionPath p) {
  return p == DecisionPath::classified ? "classified" : "identified";
}

Json metrics_json(const RunMetrics& m) {
  Json per = Json::object();
  for (const auto& [c, counts] : m.per_context)
    per[std::to_string(c)] = Json{{"correct", counts.correct}, {"incorrect", counts.incorrect}};
  return Json{{"scenario", m.scenario},
              {"seed", m.seed},
              {"failures", m.failures},
              {"episodes", m.episodes},
              {"identification_episodes", m.identification_episodes},
              {"classified_episodes", m.classified_episodes},
              {"identification_failures", m.identification_failures},
              {"identification_errors", m.identification_errors},
              {"contexts_learned", m.contexts_learned},
              {"total_samples", m.total_samples},
              {"training_time_s", m.training_time_s},
              {"per_context", per},
              {"theorem2_probability", m.theorem2_probability},
              {"theorem2_identified", m.theorem2_identified},
              {"theorem2_classified", m.theorem2_classified},
              {"delta_safe_note", "as configured"},
              {"beta", m.beta},
              {"delta_mmd", m.delta_mmd}};
}

void cmd_run_loop(const ExperimentConfig& cfg, const fs::path& out) {
  auto csv = open_csv(out / "episodes.csv");
  csv << "seed,iteration,context_truth,observation,path,context_decided,new_context,lower_bound,"
         "gain,reward,constraint,failed,identification_failed,samples\n";
  Json runs = Json::array();
  int total_failures = 0;
  int seeds_with_failures = 0;
  for (auto seed : cfg.seeds) {
    const RunResult r = run_algorithm1(cfg, seed);
    for (const auto& row : r.log) {
      fmt::print(csv, "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", seed, row.iteration,
                 row.context_truth, num(row.observation(0)), path_name(row.path),
                 row.context_decided, int(row.new_context), num(row.lower_bound), num(row.gain),
                 num(row.reward), num(row.constraint), int(row.failed),
                 int(row.identification_failed), row.samples);
    }
    runs.push_back(metrics_json(r.metrics));
    total_failures += r.metrics.failures;
    seeds_with_failures += r.metrics.failures > 0;
    const fs::path state = out / "state" / fmt::format("seed_{}", seed);
    if (r.library) save_library(state / "library", *r.library);
    if (r.safeopt_state) write_json_file(state / "safeopt.json", *r.safeopt_state);
  }
  write_json_file(out / "metrics.json",
                  Json{{"command", "run-loop"},
                       {"config", config_to_json(cfg)},
                       {"runs", runs},
                       {"summary", {{"seeds", cfg.seeds.size()},
                                    {"failures", total_failures},
                                    {"seeds_with_failures", seeds_with_failures}}}});
}

void cmd_sensitivity(const ExperimentConfig& cfg, const fs::path& out) {
  const auto seed = cfg.seeds.front();
  const SensitivityResult r = run_sensitivity(cfg, seed);
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back(Json{{"p_safe", row.p_safe},
                        {"context", row.context},
                        {"height", cfg.sensitivity.heights[static_cast<std::size_t>(row.context)]},
                        {"confident", row.confident},
                        {"correct", row.correct},
                        {"incorrect", row.incorrect},
                        {"uncertain", row.uncertain},
                        {"decided", row.decided}});
  write_json_file(out / "metrics.json", Json{{"command", "sensitivity"},
                                             {"seed", seed},
                                             {"config", config_to_json(cfg)},
                                             {"counts", rows}});
  auto csv = open_csv(out / "episodes.csv");
  csv << "p_safe,context_truth,observation,confident,context_decided,lower_bound\n";
  for (Eigen::Index i = 0; i < r.decisions.rows(); ++i) {
    const auto d = r.decisions.row(i);
    fmt::print(csv, "{},{},{},{},{},{}\n", num(d(0)), int(d(1)), num(d(2)), int(d(3)), int(d(4)),
               num(d(5)));
  }
}

void write_breakdown_header(std::ostream& csv) {
  csv << "rho,term_estimation,term_measurement,term_context_id,offset_context_id,total,"
         "context_id_included,joint_probability";
}

void write_breakdown(std::ostream& csv, const BoundBreakdown& b) {
  fmt::print(csv, "{},{},{},{},{},{},{},{}", num(b.rho), num(b.term_estimation),
             num(b.term_measurement), num(b.term_context_id), num(b.offset_context_id),
             num(b.total), int(b.context_id_included), num(b.joint_probability));
}

void cmd_logistic(const ExperimentConfig& cfg, const fs::path& out) {
  const auto seed = cfg.seeds.front();
  const LogisticResult r = run_logistic_bounds(cfg, seed);
  auto csv = open_csv(out / "bounds.csv");
  csv << "y,truth,estimate,lower,upper,";
  write_breakdown_header(csv);
  csv << ",coverage\n";
  for (const auto& row : r.rows) {
    fmt::print(csv, "{},{},{},{},{},", num(row.y), num(row.truth), num(row.estimate),
               num(row.estimate - row.bound.total), num(row.estimate + row.bound.total));
    write_breakdown(csv, row.bound);
    fmt::print(csv, ",{}\n", num(row.coverage));
  }
  write_json_file(out / "metrics.json", Json{{"command", "logistic-bounds"},
                                             {"seed", seed},
                                             {"config", config_to_json(cfg)},
                                             {"resamples", r.resamples},
                                             {"queries", r.rows.size()},
                                             {"min_coverage", r.min_coverage},
                                             {"mean_coverage", r.mean_coverage},
                                             {"target_coverage", 1.0 - cfg.delta_class}});
}

void cmd_mmd_demo(const ExperimentConfig& cfg, const fs::path& out) {
  const auto seed = cfg.seeds.front();
  const auto rows = run_closed_form_check(cfg, seed);
  auto csv = open_csv(out / "bounds.csv");
  csv << "mean_difference,sigma,empirical,standard_error,closed_form,closed_form_as_printed,z\n";
  Json cells = Json::array();
  double max_abs_z = 0.0;
  for (const auto& r : rows) {
    fmt::print(csv, "{},{},{},{},{},{},{}\n", num(r.mean_difference), num(r.sigma),
               num(r.empirical), num(r.standard_error), num(r.closed_form),
               num(r.closed_form_as_printed), num(r.z));
    max_abs_z = std::max(max_abs_z, std::abs(r.z));
  }
  Json metrics{{"command", "mmd-demo"},
               {"seed", seed},
               {"config", config_to_json(cfg)},
               {"closed_form_max_abs_z", max_abs_z}};
  if (cfg.mmd_demo.calibration_runs > 0) {
    const auto c = run_mmd_calibration(cfg, seed);
    metrics["calibration"] = Json{{"runs", cfg.mmd_demo.calibration_runs},
                                  {"same_tests", c.same_tests},
                                  {"wrong_rejects", c.wrong_rejects},
                                  {"wrong_reject_rate", c.wrong_reject_rate()},
                                  {"cross_tests", c.cross_tests},
                                  {"wrong_accepts", c.wrong_accepts},
                                  {"wrong_accept_rate", c.wrong_accept_rate()},
                                  {"max_same_mmd", c.max_same_mmd},
                                  {"min_cross_mmd", c.min_cross_mmd},
                                  {"accept_threshold", c.accept_threshold},
                                  {"required_eta", c.required_eta}};
  }
  write_json_file(out / "metrics.json", metrics);
}

void cmd_classify(const ExperimentConfig& cfg, const fs::path& out) {
  const auto& s = cfg.classify;
  if (s.dataset.empty()) throw ConfigError("classify.dataset is required");
  const auto data = read_dataset_csv(s.dataset);
  const auto model = ClassifierModel::fit(data, cfg.classifier.kernel, cfg.classifier.lambda,
                                          cfg.classifier.gamma);
  if (!s.model_out.empty()) save_model(out / s.model_out, model);
  const BoundOptions opts{cfg.classifier.context_id_offset, cfg.classifier.provenance_aware};

  auto csv = open_csv(out / "bounds.csv");
  csv << "query,";
  for (Eigen::Index i = 0; i < model.input_dim(); ++i) csv << "y_" << i << ',';
  csv << "context,estimate,normalized,lower_bound,";
  write_breakdown_header(csv);
  csv << '\n';
  Json decisions = Json::array();
  for (std::size_t q = 0; q < s.queries.size(); ++q) {
    const auto& qv = s.queries[q];
    if (static_cast<Eigen::Index>(qv.size()) != model.input_dim())
      throw ConfigError(fmt::format("classify.queries[{}] has dimension {}, dataset has {}", q,
                                    qv.size(), model.input_dim()));
    const Vector y = Eigen::Map<const Vector>(qv.data(), static_cast<Eigen::Index>(qv.size()));
    const Vector raw = model.predict_raw(y);
    const Vector norm = model.predict_normalized(y);
    const BoundBreakdown b = model.total_bound(y, cfg.delta_class, cfg.delta_mmd(), opts);
    for (Eigen::Index c = 0; c < model.num_contexts(); ++c) {
      fmt::print(csv, "{},", q);
      for (double v : qv) fmt::print(csv, "{},", num(v));
      fmt::print(csv, "{},{},{},{},", model.context_ids()[static_cast<std::size_t>(c)], num(raw(c)),
                 num(norm(c)), num(raw(c) - b.total));
      write_breakdown(csv, b);
      csv << '\n';
    }
    const auto d = model.decide(y, cfg.p_safe, cfg.delta_class, cfg.delta_mmd(), opts);
    decisions.push_back(Json{{"query", q},
                             {"confident", d.confident},
                             {"context", d.context},
                             {"lower_bound", d.lower_bound}});
  }
  write_json_file(out / "metrics.json", Json{{"command", "classify"},
                                             {"config", config_to_json(cfg)},
                                             {"observations", model.size()},
                                             {"contexts", model.context_ids()},
                                             {"all_ground_truth", model.all_ground_truth()},
                                             {"decisions", decisions}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware safe learning experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::vector<std::pair<std::string, void (*)(const ExperimentConfig&, const fs::path&)>> commands{
      {"run-loop", cmd_run_loop},         {"sensitivity", cmd_sensitivity},
      {"logistic-bounds", cmd_logistic}, {"mmd-demo", cmd_mmd_demo},
      {"classify", cmd_classify}};
  const std::map<std::string, std::string> help{
      {"run-loop", "Run the safe learning loop (full-loop, pure-safeopt or always-identify)"},
      {"sensitivity", "Sweep p_safe over the five-height channel"},
      {"logistic-bounds", "Estimates, bounds and coverage on the logistic benchmark"},
      {"mmd-demo", "Closed-form MMD check and identification calibration"},
      {"classify", "Fit a dataset CSV and classify query points"}};
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const ExperimentConfig cfg = load_config(config_path);
    fs::create_directories(out_dir);
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) {
        fmt::print(stderr, "ctxsafe {}: simd backend {}\n", name,
                   simd::backend_name(simd::active_backend()));
        fn(cfg, out_dir);
      }
    }
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const InputError& e) {
    fmt::print(stderr, "input error: {}\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical failure: {} (last jitter {})\n", e.what(), e.last_jitter());
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "i/o error: {}\n", e.what());
    return kExitConfig;
  }
  return 0;
}

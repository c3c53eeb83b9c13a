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

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "ctxsafe/errors.hpp"
#include "ctxsafe/harness.hpp"

namespace ctxsafe {

namespace fs = std::filesystem;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where_));
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", where_, key, e.what()));
    }
  }

  void kernel(const char* key, KernelSpec& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = kernel_from_json(j_.at(key));
    } catch (const InputError& e) {
      throw ConfigError(fmt::format("{}.{}: {}", where_, key, e.what()));
    }
  }

  std::optional<Reader> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Reader(j_.at(key), where_ + "." + key);
  }

  void known(const char* key) { seen_.insert(key); }
  const Json& raw() const { return j_; }
  const std::string& where() const { return where_; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", where_, k));
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool open_unit(double v) { return v > 0.0 && v < 1.0; }

OffsetConvention offset_from_string(const std::string& s) {
  if (s == "as-printed") return OffsetConvention::as_printed;
  if (s == "mismatch-rate") return OffsetConvention::mismatch_rate;
  throw ConfigError(fmt::format("unknown context_id_offset '{}'", s));
}

std::string offset_to_string(OffsetConvention c) {
  return c == OffsetConvention::as_printed ? "as-printed" : "mismatch-rate";
}

std::string resolve(const std::string& p, const fs::path& base) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).string();
}

}  // namespace

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::full_loop: return "full-loop";
    case Scenario::pure_safeopt: return "pure-safeopt";
    case Scenario::always_identify: return "always-identify";
    case Scenario::sensitivity: return "sensitivity";
    case Scenario::logistic_bounds: return "logistic-bounds";
    case Scenario::mmd_demo: return "mmd-demo";
  }
  return "?";
}

Scenario scenario_from_string(std::string_view name) {
  for (auto s : {Scenario::full_loop, Scenario::pure_safeopt, Scenario::always_identify,
                 Scenario::sensitivity, Scenario::logistic_bounds, Scenario::mmd_demo})
    if (to_string(s) == name) return s;
  throw ConfigError(fmt::format("unknown scenario '{}'", name));
}

void ExperimentConfig::validate() const {
  require(p_safe > 0.0 && p_safe < 1.0, "p_safe must lie in (0, 1)");
  require(open_unit(delta_class), "delta_class must lie in (0, 1)");
  require(open_unit(delta_mmd_prime), "delta_mmd_prime must lie in (0, 1)");
  require(open_unit(epsilon), "epsilon must lie in (0, 1)");
  require(open_unit(delta_safe), "delta_safe must lie in (0, 1)");
  require(delta_mmd() < 0.5, "(delta_mmd_prime + 2 epsilon) / 3 must stay below 1/2");
  require(iterations >= 1, "iterations must be >= 1");
  require(!seeds.empty(), "seeds must not be empty");

  try {
    classifier.kernel.validate();
    identification.kernel.validate();
    optimizer.safeopt.validate();
    logistic.kernel.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  require(classifier.lambda > 0.0, "classifier.lambda must be positive");
  require(classifier.gamma > 0.0, "classifier.gamma must be positive");

  const auto& id = identification;
  require(id.shift >= 1, "identification.shift must be >= 1");
  require(id.steps >= 2 * id.shift, "identification.steps must allow at least two sub-samples");
  require(!id.features.empty(), "identification.features must not be empty");
  for (int f : id.features) require(f >= 0 && f < 4, "identification.features must index the 4 pendulum states");
  require(!id.k_bound || *id.k_bound > 0.0, "identification.k_bound must be positive");
  require(id.chirp_amplitude >= 0.0, "identification.chirp_amplitude must be >= 0");

  const auto& p = pendulum;
  require(p.pole_scales.size() >= 2, "pendulum.pole_scales needs at least two contexts");
  for (double s : p.pole_scales) require(s > 0.0, "pendulum.pole_scales must be positive");
  require(p.process_noise_std.size() == 4, "pendulum.process_noise_std needs 4 entries");
  for (double s : p.process_noise_std) require(s >= 0.0, "pendulum.process_noise_std must be >= 0");
  require(p.failure_threshold > 0.0, "pendulum.failure_threshold must be positive");
  require(p.episode_steps >= 1, "pendulum.episode_steps must be >= 1");
  require(p.heights.size() == p.pole_scales.size(), "pendulum.heights needs one entry per context");
  require(p.observation_noise >= 0.0, "pendulum.observation_noise must be >= 0");
  if (!p.context_probabilities.empty()) {
    require(p.context_probabilities.size() == p.pole_scales.size(),
            "pendulum.context_probabilities needs one entry per context");
    double total = 0.0;
    for (double v : p.context_probabilities) {
      require(v >= 0.0, "pendulum.context_probabilities must be >= 0");
      total += v;
    }
    require(std::abs(total - 1.0) < 1e-9, "pendulum.context_probabilities must sum to 1");
  }

  const auto& o = optimizer;
  require(o.gain_upper > o.gain_lower, "optimizer.gain_upper must exceed gain_lower");
  require(o.grid_points >= 2, "optimizer.grid_points must be >= 2");
  require(o.reward_scale > 0.0, "optimizer.reward_scale must be positive");

  const auto& s = sensitivity;
  require(s.heights.size() >= 2, "sensitivity.heights needs at least two contexts");
  require(!s.p_safe_values.empty(), "sensitivity.p_safe_values must not be empty");
  for (double v : s.p_safe_values) require(v > 0.0 && v < 1.0, "sensitivity.p_safe_values must lie in (0, 1)");
  require(s.decisions >= 1, "sensitivity.decisions must be >= 1");
  require(s.training_per_context >= 1, "sensitivity.training_per_context must be >= 1");
  require(s.observation_noise >= 0.0, "sensitivity.observation_noise must be >= 0");

  const auto& l = logistic;
  require(l.lambda > 0.0, "logistic.lambda must be positive");
  require(l.resamples >= 1, "logistic.resamples must be >= 1");
  require(l.queries >= 1, "logistic.queries must be >= 1");
  require(l.query_upper > l.query_lower, "logistic.query_upper must exceed query_lower");

  const auto& m = mmd_demo;
  require(m.samples >= 2, "mmd_demo.samples must be >= 2");
  require(m.gamma > 0.0, "mmd_demo.gamma must be positive");
  for (double v : m.sigmas) require(v > 0.0, "mmd_demo.sigmas must be positive");
  require(m.bootstrap >= 2, "mmd_demo.bootstrap must be >= 2");
  require(m.calibration_runs >= 0, "mmd_demo.calibration_runs must be >= 0");

  for (const auto& q : classify.queries) require(!q.empty(), "classify.queries entries must be non-empty");
}

ExperimentConfig config_from_json(const Json& j, const fs::path& base_dir) {
  ExperimentConfig cfg;
  Reader top(j, "config");
  std::string scenario = std::string(to_string(cfg.scenario));
  top.get("scenario", scenario);
  cfg.scenario = scenario_from_string(scenario);
  top.get("p_safe", cfg.p_safe);
  top.get("delta_class", cfg.delta_class);
  top.get("delta_mmd_prime", cfg.delta_mmd_prime);
  top.get("epsilon", cfg.epsilon);
  top.get("delta_safe", cfg.delta_safe);
  top.get("iterations", cfg.iterations);
  top.get("seeds", cfg.seeds);

  if (auto r = top.child("classifier")) {
    r->kernel("kernel", cfg.classifier.kernel);
    r->get("lambda", cfg.classifier.lambda);
    r->get("gamma", cfg.classifier.gamma);
    std::string off = offset_to_string(cfg.classifier.context_id_offset);
    r->get("context_id_offset", off);
    cfg.classifier.context_id_offset = offset_from_string(off);
    r->get("provenance_aware", cfg.classifier.provenance_aware);
    r->finish();
  }
  if (auto r = top.child("identification")) {
    auto& s = cfg.identification;
    r->kernel("kernel", s.kernel);
    double kb = 0.0;
    bool has_kb = r->raw().contains("k_bound") && !r->raw()["k_bound"].is_null();
    if (has_kb) {
      r->get("k_bound", kb);
      s.k_bound = kb;
    } else {
      r->known("k_bound");
    }
    r->get("shift", s.shift);
    r->get("steps", s.steps);
    r->get("features", s.features);
    r->get("chirp_f0", s.chirp_f0);
    r->get("chirp_f1", s.chirp_f1);
    r->get("chirp_amplitude", s.chirp_amplitude);
    r->finish();
  }
  if (auto r = top.child("pendulum")) {
    auto& s = cfg.pendulum;
    r->get("pole_scales", s.pole_scales);
    r->get("process_noise_std", s.process_noise_std);
    r->get("failure_threshold", s.failure_threshold);
    r->get("episode_steps", s.episode_steps);
    r->get("heights", s.heights);
    r->get("observation_noise", s.observation_noise);
    r->get("context_probabilities", s.context_probabilities);
    r->finish();
  }
  if (auto r = top.child("optimizer")) {
    auto& s = cfg.optimizer;
    r->kernel("parameter_kernel", s.safeopt.parameter_kernel);
    r->kernel("context_kernel", s.safeopt.context_kernel);
    r->get("noise_variance", s.safeopt.noise_variance);
    r->get("beta", s.safeopt.beta);
    r->get("gain_lower", s.gain_lower);
    r->get("gain_upper", s.gain_upper);
    r->get("grid_points", s.grid_points);
    r->get("reward_scale", s.reward_scale);
    r->finish();
  }
  if (auto r = top.child("sensitivity")) {
    auto& s = cfg.sensitivity;
    r->get("heights", s.heights);
    r->get("p_safe_values", s.p_safe_values);
    r->get("decisions", s.decisions);
    r->get("training_per_context", s.training_per_context);
    r->get("observation_noise", s.observation_noise);
    r->finish();
  }
  if (auto r = top.child("logistic")) {
    auto& s = cfg.logistic;
    r->kernel("kernel", s.kernel);
    r->get("lambda", s.lambda);
    r->get("resamples", s.resamples);
    r->get("queries", s.queries);
    r->get("query_lower", s.query_lower);
    r->get("query_upper", s.query_upper);
    r->finish();
  }
  if (auto r = top.child("mmd_demo")) {
    auto& s = cfg.mmd_demo;
    r->get("samples", s.samples);
    r->get("gamma", s.gamma);
    r->get("mean_differences", s.mean_differences);
    r->get("sigmas", s.sigmas);
    r->get("bootstrap", s.bootstrap);
    r->get("calibration_runs", s.calibration_runs);
    r->finish();
  }
  if (auto r = top.child("classify")) {
    auto& s = cfg.classify;
    r->get("dataset", s.dataset);
    r->get("queries", s.queries);
    r->get("model_out", s.model_out);
    s.dataset = resolve(s.dataset, base_dir);
    r->finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

Json config_to_json(const ExperimentConfig& cfg) {
  const auto& c = cfg.classifier;
  const auto& id = cfg.identification;
  const auto& p = cfg.pendulum;
  const auto& o = cfg.optimizer;
  const auto& s = cfg.sensitivity;
  const auto& l = cfg.logistic;
  const auto& m = cfg.mmd_demo;
  Json ident{{"kernel", kernel_to_json(id.kernel)},
             {"shift", id.shift},
             {"steps", id.steps},
             {"features", id.features},
             {"chirp_f0", id.chirp_f0},
             {"chirp_f1", id.chirp_f1},
             {"chirp_amplitude", id.chirp_amplitude}};
  ident["k_bound"] = id.k_bound ? Json(*id.k_bound) : Json(nullptr);
  return Json{
      {"scenario", std::string(to_string(cfg.scenario))},
      {"p_safe", cfg.p_safe},
      {"delta_class", cfg.delta_class},
      {"delta_mmd_prime", cfg.delta_mmd_prime},
      {"epsilon", cfg.epsilon},
      {"delta_safe", cfg.delta_safe},
      {"iterations", cfg.iterations},
      {"seeds", cfg.seeds},
      {"classifier", {{"kernel", kernel_to_json(c.kernel)},
                      {"lambda", c.lambda},
                      {"gamma", c.gamma},
                      {"context_id_offset", offset_to_string(c.context_id_offset)},
                      {"provenance_aware", c.provenance_aware}}},
      {"identification", ident},
      {"pendulum", {{"pole_scales", p.pole_scales},
                    {"process_noise_std", p.process_noise_std},
                    {"failure_threshold", p.failure_threshold},
                    {"episode_steps", p.episode_steps},
                    {"heights", p.heights},
                    {"observation_noise", p.observation_noise},
                    {"context_probabilities", p.context_probabilities}}},
      {"optimizer", {{"parameter_kernel", kernel_to_json(o.safeopt.parameter_kernel)},
                     {"context_kernel", kernel_to_json(o.safeopt.context_kernel)},
                     {"noise_variance", o.safeopt.noise_variance},
                     {"beta", o.safeopt.beta},
                     {"gain_lower", o.gain_lower},
                     {"gain_upper", o.gain_upper},
                     {"grid_points", o.grid_points},
                     {"reward_scale", o.reward_scale}}},
      {"sensitivity", {{"heights", s.heights},
                       {"p_safe_values", s.p_safe_values},
                       {"decisions", s.decisions},
                       {"training_per_context", s.training_per_context},
                       {"observation_noise", s.observation_noise}}},
      {"logistic", {{"kernel", kernel_to_json(l.kernel)},
                    {"lambda", l.lambda},
                    {"resamples", l.resamples},
                    {"queries", l.queries},
                    {"query_lower", l.query_lower},
                    {"query_upper", l.query_upper}}},
      {"mmd_demo", {{"samples", m.samples},
                    {"gamma", m.gamma},
                    {"mean_differences", m.mean_differences},
                    {"sigmas", m.sigmas},
                    {"bootstrap", m.bootstrap},
                    {"calibration_runs", m.calibration_runs}}},
      {"classify", {{"dataset", cfg.classify.dataset},
                    {"queries", cfg.classify.queries},
                    {"model_out", cfg.classify.model_out}}}};
}

ExperimentConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j, path.parent_path());
}

}  // namespace ctxsafe

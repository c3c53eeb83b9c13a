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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxsafe/cme_classifier.hpp"
#include "ctxsafe/context_identifier.hpp"
#include "ctxsafe/kernel.hpp"
#include "ctxsafe/safe_optimizer.hpp"

namespace ctxsafe {

using Json = nlohmann::json;

/// Shortest text that round-trips the double exactly.
std::string format_real(double v);

Json kernel_to_json(const KernelSpec& k);
KernelSpec kernel_from_json(const Json& j);

/// Header y_0..y_{s-1},context,provenance,delta_mmd; provenance is gt or id,
/// delta_mmd is left blank for gt rows.
std::vector<LabeledObservation> read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const std::filesystem::path& path,
                       const std::vector<LabeledObservation>& data);

/// Inputs, labels, kernel, lambda and Gamma; the model is refit on load.
Json model_to_json(const ClassifierModel& model);
ClassifierModel model_from_json(const Json& j);
void save_model(const std::filesystem::path& path, const ClassifierModel& model);
ClassifierModel load_model(const std::filesystem::path& path);

/// Sidecar of traj.csv is traj.json with dt and, if known, context_truth.
std::filesystem::path trajectory_sidecar(const std::filesystem::path& csv_path);
void write_trajectory(const std::filesystem::path& csv_path, const Trajectory& traj);
Trajectory read_trajectory(const std::filesystem::path& csv_path);

/// Directory with manifest.json (kernel, k_bound, shift, ids) and one
/// context_<id>.csv per entry.
void save_library(const std::filesystem::path& dir, const ContextLibrary& library);
ContextLibrary load_library(const std::filesystem::path& dir);

/// Grid, seeds, config, data and per-context intervals and masks.
Json safeopt_snapshot(const SafeOptState& state);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

/// Comma-separated numeric rows with a header line.
void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Matrix& values);
Matrix read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* header = nullptr);

}  // namespace ctxsafe

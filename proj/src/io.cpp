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

#include "ctxsafe/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ctxsafe/errors.hpp"

namespace ctxsafe {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_real(const std::string& text, const fs::path& path, std::size_t line) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end)
    throw InputError(fmt::format("{}:{}: '{}' is not a number", path.string(), line, t));
  return v;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& path,
                                                std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw InputError(fmt::format("{} is empty", path.string()));
  header.clear();
  for (auto& h : split(trim(line))) header.push_back(trim(h));
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split(trim(line));
    if (cells.size() != header.size())
      throw InputError(fmt::format("{}:{}: expected {} fields, found {}", path.string(),
                                   rows.size() + 2, header.size(), cells.size()));
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
  return out;
}

std::vector<std::string> indexed_header(const char* prefix, Eigen::Index n) {
  std::vector<std::string> h;
  for (Eigen::Index i = 0; i < n; ++i) h.push_back(fmt::format("{}{}", prefix, i));
  return h;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Json mask_to_json(const std::vector<bool>& mask) {
  Json arr = Json::array();
  for (bool b : mask) arr.push_back(b);
  return arr;
}

}  // namespace

std::string format_real(double v) { return fmt::format("{}", v); }

Json kernel_to_json(const KernelSpec& k) {
  return Json{{"kind", std::string(to_string(k.kind))},
              {"lengthscale", k.lengthscale},
              {"magnitude", k.magnitude}};
}

KernelSpec kernel_from_json(const Json& j) {
  try {
    KernelSpec k;
    k.kind = kernel_kind_from_string(j.at("kind").get<std::string>());
    k.lengthscale = j.value("lengthscale", 1.0);
    k.magnitude = j.value("magnitude", 1.0);
    k.validate();
    return k;
  } catch (const Json::exception& e) {
    throw InputError(fmt::format("bad kernel spec: {}", e.what()));
  }
}

std::vector<LabeledObservation> read_dataset_csv(const fs::path& path) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  const auto n = header.size();
  if (n < 4 || header[n - 3] != "context" || header[n - 2] != "provenance" ||
      header[n - 1] != "delta_mmd")
    throw InputError(fmt::format("{}: header must end with context,provenance,delta_mmd",
                                 path.string()));
  const std::size_t s = n - 3;
  for (std::size_t i = 0; i < s; ++i)
    if (header[i] != fmt::format("y_{}", i))
      throw InputError(fmt::format("{}: column {} should be y_{}", path.string(), i, i));

  std::vector<LabeledObservation> data;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    const std::size_t line = r + 2;
    LabeledObservation obs;
    obs.y.resize(static_cast<Eigen::Index>(s));
    for (std::size_t i = 0; i < s; ++i)
      obs.y(static_cast<Eigen::Index>(i)) = parse_real(cells[i], path, line);
    const double ctx = parse_real(cells[s], path, line);
    if (ctx != static_cast<double>(static_cast<ContextId>(ctx)) || ctx < 0)
      throw InputError(fmt::format("{}:{}: context must be a nonnegative integer", path.string(), line));
    obs.context = static_cast<ContextId>(ctx);
    const std::string prov = trim(cells[s + 1]);
    const std::string dm = trim(cells[s + 2]);
    if (prov == "gt") {
      obs.provenance = Provenance::ground_truth;
      if (!dm.empty())
        throw InputError(fmt::format("{}:{}: delta_mmd must be blank for gt", path.string(), line));
    } else if (prov == "id") {
      obs.provenance = Provenance::identified;
      obs.delta_mmd = parse_real(dm, path, line);
      if (!(obs.delta_mmd > 0.0 && obs.delta_mmd < 1.0))
        throw InputError(fmt::format("{}:{}: delta_mmd must lie in (0, 1)", path.string(), line));
    } else {
      throw InputError(fmt::format("{}:{}: provenance must be gt or id", path.string(), line));
    }
    data.push_back(std::move(obs));
  }
  if (data.empty()) throw InputError(fmt::format("{}: no observations", path.string()));
  return data;
}

void write_dataset_csv(const fs::path& path, const std::vector<LabeledObservation>& data) {
  if (data.empty()) throw InputError("cannot write an empty dataset");
  const auto s = data.front().y.size();
  auto out = open_out(path);
  for (const auto& h : indexed_header("y_", s)) out << h << ',';
  out << "context,provenance,delta_mmd\n";
  for (const auto& obs : data) {
    if (obs.y.size() != s) throw InputError("dataset rows differ in dimension");
    for (Eigen::Index i = 0; i < s; ++i) out << format_real(obs.y(i)) << ',';
    out << obs.context << ',';
    if (obs.provenance == Provenance::ground_truth)
      out << "gt,\n";
    else
      out << "id," << format_real(obs.delta_mmd) << '\n';
  }
}

Json model_to_json(const ClassifierModel& model) {
  Json obs = Json::array();
  for (const auto& o : model.observations()) {
    obs.push_back(Json{{"y", vector_to_json(o.y)},
                       {"context", o.context},
                       {"provenance", o.provenance == Provenance::ground_truth ? "gt" : "id"},
                       {"delta_mmd", o.delta_mmd}});
  }
  return Json{{"kernel", kernel_to_json(model.kernel())},
              {"lambda", model.lam()},
              {"gamma", model.gamma()},
              {"context_ids", model.context_ids()},
              {"observations", std::move(obs)}};
}

ClassifierModel model_from_json(const Json& j) {
  try {
    const KernelSpec kernel = kernel_from_json(j.at("kernel"));
    const double lam = j.at("lambda").get<double>();
    const double gamma = j.at("gamma").get<double>();
    const auto ids = j.at("context_ids").get<std::vector<ContextId>>();
    std::vector<LabeledObservation> data;
    for (const auto& o : j.at("observations")) {
      LabeledObservation obs;
      const auto y = o.at("y").get<std::vector<double>>();
      obs.y = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
      obs.context = o.at("context").get<ContextId>();
      const auto prov = o.at("provenance").get<std::string>();
      if (prov != "gt" && prov != "id") throw InputError("provenance must be gt or id");
      obs.provenance = prov == "gt" ? Provenance::ground_truth : Provenance::identified;
      obs.delta_mmd = o.value("delta_mmd", 0.0);
      data.push_back(std::move(obs));
    }
    // Replay the column order: contexts present in the first fit are sorted,
    // later ones were appended by add_context.
    std::size_t sorted_prefix = 1;
    while (sorted_prefix < ids.size() && ids[sorted_prefix - 1] < ids[sorted_prefix]) ++sorted_prefix;
    std::vector<LabeledObservation> base;
    for (const auto& o : data)
      if (std::find(ids.begin(), ids.begin() + static_cast<long>(sorted_prefix), o.context) !=
          ids.begin() + static_cast<long>(sorted_prefix))
        base.push_back(o);
    auto model = ClassifierModel::fit(std::move(base), kernel, lam, gamma);
    for (std::size_t k = sorted_prefix; k < ids.size(); ++k) {
      std::vector<LabeledObservation> extra;
      for (const auto& o : data)
        if (o.context == ids[k]) extra.push_back(o);
      model = model.add_context(extra);
    }
    if (model.size() != static_cast<Eigen::Index>(data.size()))
      throw InputError("model observations reference contexts missing from context_ids");
    return model;
  } catch (const Json::exception& e) {
    throw InputError(fmt::format("bad model file: {}", e.what()));
  }
}

void save_model(const fs::path& path, const ClassifierModel& model) {
  write_json_file(path, model_to_json(model));
}

ClassifierModel load_model(const fs::path& path) { return model_from_json(read_json_file(path)); }

fs::path trajectory_sidecar(const fs::path& csv_path) {
  auto p = csv_path;
  return p.replace_extension(".json");
}

void write_trajectory(const fs::path& csv_path, const Trajectory& traj) {
  traj.validate();
  write_matrix_csv(csv_path, indexed_header("x_", traj.state_dim()), traj.samples);
  Json side{{"dt", traj.dt}};
  if (traj.context_truth) side["context_truth"] = *traj.context_truth;
  write_json_file(trajectory_sidecar(csv_path), side);
}

Trajectory read_trajectory(const fs::path& csv_path) {
  std::vector<std::string> header;
  Trajectory traj;
  traj.samples = read_matrix_csv(csv_path, &header);
  const auto expected = indexed_header("x_", static_cast<Eigen::Index>(header.size()));
  if (header != expected)
    throw InputError(fmt::format("{}: header must be x_0..x_{{l-1}}", csv_path.string()));
  const Json side = read_json_file(trajectory_sidecar(csv_path));
  try {
    traj.dt = side.at("dt").get<double>();
    if (side.contains("context_truth") && !side["context_truth"].is_null())
      traj.context_truth = side["context_truth"].get<ContextId>();
  } catch (const Json::exception& e) {
    throw InputError(fmt::format("bad trajectory sidecar: {}", e.what()));
  }
  traj.validate();
  return traj;
}

void save_library(const fs::path& dir, const ContextLibrary& library) {
  fs::create_directories(dir);
  Json ids = Json::array();
  for (const auto& [id, data] : library.entries()) {
    ids.push_back(id);
    write_matrix_csv(dir / fmt::format("context_{}.csv", id), indexed_header("x_", data.cols()),
                     data);
  }
  write_json_file(dir / "manifest.json", Json{{"kernel", kernel_to_json(library.kernel())},
                                              {"k_bound", library.k_bound()},
                                              {"shift", library.shift()},
                                              {"contexts", ids}});
}

ContextLibrary load_library(const fs::path& dir) {
  const Json manifest = read_json_file(dir / "manifest.json");
  try {
    ContextLibrary library(kernel_from_json(manifest.at("kernel")),
                           manifest.at("k_bound").get<double>(), manifest.at("shift").get<int>());
    for (const auto& id : manifest.at("contexts"))
      library.insert(id.get<ContextId>(),
                     read_matrix_csv(dir / fmt::format("context_{}.csv", id.get<ContextId>())));
    return library;
  } catch (const Json::exception& e) {
    throw InputError(fmt::format("bad library manifest: {}", e.what()));
  }
}

Json safeopt_snapshot(const SafeOptState& state) {
  const auto& cfg = state.config();
  Json data = Json::array();
  for (const auto& d : state.data())
    data.push_back(Json{{"a", vector_to_json(d.a)},
                        {"c", d.c},
                        {"f", d.f_meas},
                        {"g", vector_to_json(d.g_meas)}});
  Json contexts = Json::object();
  for (const auto& [c, s] : state.contexts())
    contexts[std::to_string(c)] = Json{{"lower", matrix_to_json(s.lower)},
                                       {"upper", matrix_to_json(s.upper)},
                                       {"safe", mask_to_json(s.safe)},
                                       {"expanders", mask_to_json(s.expanders)},
                                       {"maximizers", mask_to_json(s.maximizers)}};
  std::vector<Eigen::Index> seeds = state.seeds();
  return Json{{"grid", matrix_to_json(state.grid())},
              {"seeds", seeds},
              {"config", Json{{"parameter_kernel", kernel_to_json(cfg.parameter_kernel)},
                              {"context_kernel", kernel_to_json(cfg.context_kernel)},
                              {"noise_variance", cfg.noise_variance},
                              {"beta", cfg.beta},
                              {"num_constraints", cfg.num_constraints}}},
              {"data", std::move(data)},
              {"contexts", std::move(contexts)}};
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InputError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json_file(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_matrix_csv(const fs::path& path, const std::vector<std::string>& header,
                      const Matrix& values) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols())
    throw InputError("header size does not match column count");
  auto out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      out << (c ? "," : "") << format_real(values(r, c));
    out << '\n';
  }
}

Matrix read_matrix_csv(const fs::path& path, std::vector<std::string>* header) {
  std::vector<std::string> h;
  const auto rows = read_rows(path, h);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(h.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < h.size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_real(rows[r][c], path, r + 2);
  if (header) *header = std::move(h);
  return m;
}

}  // namespace ctxsafe

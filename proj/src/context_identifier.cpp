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

#include "ctxsafe/context_identifier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ctxsafe/errors.hpp"
#include "ctxsafe/simd/kernels.hpp"

namespace ctxsafe {
namespace {

simd::PointsView view_of(const Points& p) {
  return {p.data(), static_cast<std::size_t>(p.rows()), static_cast<std::size_t>(p.cols()),
          static_cast<std::size_t>(p.rows())};
}

double block_mean(const Points& a, const Points& b, const KernelSpec& kernel) {
  const double pairs = static_cast<double>(a.rows()) * static_cast<double>(b.rows());
  if (kernel.kind == KernelKind::gaussian) {
    const double inv_two_ls2 = 1.0 / (2.0 * kernel.lengthscale * kernel.lengthscale);
    return kernel.diagonal() *
           simd::active_ops().gaussian_block_sum(view_of(a), view_of(b), inv_two_ls2) / pairs;
  }
  return cross_gram(kernel, a, b).sum() / pairs;
}

// Lexicographic order on the raw data; fixes the summation order of the cross
// term so that mmd(x, y) and mmd(y, x) agree bit for bit.
bool data_less(const Points& a, const Points& b) {
  const auto n = a.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a.data()[i] != b.data()[i]) return a.data()[i] < b.data()[i];
  }
  return false;
}

void check_probability(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0)) throw InputError(std::string(name) + " must lie in (0, 1)");
}

double gretton_scale(Eigen::Index r, double k_bound, double delta) {
  if (r < 1) throw InputError("sample count r must be at least 1");
  if (!(k_bound > 0.0)) throw InputError("kernel bound K must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw InputError("confidence parameter must lie in (0, 1]");
  return std::sqrt(2.0 * k_bound / static_cast<double>(r)) *
         (1.0 + std::sqrt(2.0 * std::log(2.0 / delta)));
}

}  // namespace

void Trajectory::validate() const {
  if (samples.rows() < 2) throw InputError("trajectory needs at least two samples");
  if (samples.cols() < 1) throw InputError("trajectory has no state columns");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("trajectory dt must be positive");
}

Trajectory Trajectory::select_columns(const std::vector<int>& columns) const {
  Trajectory out;
  out.dt = dt;
  out.context_truth = context_truth;
  out.samples.resize(samples.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] < 0 || columns[k] >= samples.cols())
      throw InputError("state column " + std::to_string(columns[k]) + " out of range");
    out.samples.col(static_cast<Eigen::Index>(k)) = samples.col(columns[k]);
  }
  return out;
}

void SubsampleConfig::validate() const {
  if (shift < 1) throw InputError("sub-sampling shift must be at least 1");
  check_probability(epsilon, "epsilon");
}

MmdTestResult MmdTestResult::make(ContextId context, double mmd_sq, Eigen::Index r,
                                  double k_bound, double delta_prime, double epsilon) {
  check_probability(delta_prime, "delta_prime");
  check_probability(epsilon, "epsilon");
  MmdTestResult t;
  t.context = context;
  t.mmd_sq = mmd_sq;
  t.r = r;
  t.delta_mmd_prime = delta_prime;
  t.delta_mmd = composed_delta_mmd(delta_prime, epsilon);
  t.accept_threshold = ctxsafe::accept_threshold(r, k_bound, delta_prime);
  t.eta_required = ctxsafe::required_eta(r, k_bound, t.delta_mmd);
  t.accepted = mmd_sq < t.accept_threshold;
  return t;
}

ContextLibrary::ContextLibrary(const KernelSpec& kernel, int shift)
    : ContextLibrary(kernel, kernel.diagonal(), shift) {}

ContextLibrary::ContextLibrary(const KernelSpec& kernel, double k_bound, int shift)
    : kernel_(kernel), k_bound_(k_bound), shift_(shift) {
  kernel_.validate();
  if (!(k_bound_ > 0.0)) throw InputError("library kernel bound must be positive");
  if (shift_ < 1) throw InputError("library shift must be at least 1");
}

ContextId ContextLibrary::next_id() const {
  return entries_.empty() ? 0 : entries_.rbegin()->first + 1;
}

void ContextLibrary::insert(ContextId id, Points data) {
  if (data.rows() < 1 || data.cols() < 1) throw InputError("library entry is empty");
  if (entries_.count(id) != 0) throw InputError("context " + std::to_string(id) + " already stored");
  if (!entries_.empty()) {
    const Points& first = entries_.begin()->second;
    if (first.rows() != data.rows() || first.cols() != data.cols())
      throw InputError("library entries must share sample count and state dimension");
  }
  const Matrix k = gram(kernel_, data).values;
  if (k.minCoeff() < 0.0 || k.maxCoeff() > k_bound_ * (1.0 + 1e-12))
    throw InputError("library kernel leaves [0, K] on the stored data");
  entries_.emplace(id, std::move(data));
}

MmdTerms mmd_terms(const Points& x, const Points& y, const KernelSpec& kernel) {
  if (x.rows() != y.rows())
    throw InputError("mmd: sample counts differ (" + std::to_string(x.rows()) + " vs " +
                     std::to_string(y.rows()) + ")");
  if (x.rows() < 1) throw InputError("mmd: empty samples");
  if (x.cols() != y.cols()) throw InputError("mmd: sample dimensions differ");
  kernel.validate();
  const double cross = data_less(y, x) ? block_mean(y, x, kernel) : block_mean(x, y, kernel);
  return {block_mean(x, x, kernel), block_mean(y, y, kernel), cross};
}

double mmd_squared(const Points& x, const Points& y, const KernelSpec& kernel) {
  return std::max(0.0, mmd_terms(x, y, kernel).unclamped());
}

Points subsample(const Trajectory& traj, int shift) {
  traj.validate();
  if (shift < 1) throw InputError("sub-sampling shift must be at least 1");
  const Eigen::Index rows = traj.length() / shift;
  Points out(rows, traj.state_dim());
  for (Eigen::Index k = 0; k < rows; ++k) out.row(k) = traj.samples.row((k + 1) * shift);
  return out;
}

double accept_threshold(Eigen::Index r, double k_bound, double delta_prime) {
  return 2.0 * gretton_scale(r, k_bound, delta_prime);
}

double required_eta(Eigen::Index r, double k_bound, double delta_mmd) {
  return 4.0 * gretton_scale(r, k_bound, delta_mmd);
}

double composed_delta_mmd(double delta_prime, double epsilon) {
  return (delta_prime + 2.0 * epsilon) / 3.0;
}

IdentifyOutcome identify(const Trajectory& current, ContextLibrary& library,
                         const SubsampleConfig& config, double delta_prime) {
  config.validate();
  check_probability(delta_prime, "delta_prime");
  IdentifyOutcome outcome;
  outcome.delta_mmd = composed_delta_mmd(delta_prime, config.epsilon);

  Points x = subsample(current, config.shift);
  if (x.rows() < 1) throw InputError("trajectory too short for the configured shift");

  for (const auto& [id, stored] : library.entries()) {
    if (stored.cols() != x.cols()) throw InputError("trajectory state dimension differs from library");
    const Eigen::Index r = std::min(x.rows(), stored.rows());
    const double mmd = mmd_squared(x.topRows(r), stored.topRows(r), library.kernel());
    outcome.tests.push_back(
        MmdTestResult::make(id, mmd, r, library.k_bound(), delta_prime, config.epsilon));
    if (outcome.tests.back().accepted) {
      outcome.context = id;
      return outcome;
    }
  }

  outcome.new_context = true;
  outcome.context = library.next_id();
  if (!library.empty()) {
    const Eigen::Index r = library.entries().begin()->second.rows();
    if (x.rows() > r) x.conservativeResize(r, Eigen::NoChange);
    if (x.rows() < r)
      throw InputError("new context data is shorter than the stored library entries");
  }
  library.insert(outcome.context, std::move(x));
  return outcome;
}

MixingShiftEstimate estimate_mixing_shift(const Trajectory& first, const Trajectory& second,
                                          const KernelSpec& kernel, int a_max,
                                          const MixingShiftOptions& options) {
  if (a_max < 1) throw InputError("a_max must be at least 1");
  first.validate();
  second.validate();
  if (a_max > std::min(first.length(), second.length()))
    throw InputError("a_max exceeds the trajectory length");
  if (options.window < 0) throw InputError("window must be nonnegative");
  const double k_bound = options.k_bound.value_or(kernel.diagonal());

  MixingShiftEstimate est;
  std::vector<bool> below(static_cast<std::size_t>(a_max));
  for (int a = 1; a <= a_max; ++a) {
    const Points x = subsample(first, a);
    const Points y = subsample(second, a);
    const Eigen::Index r = std::min(x.rows(), y.rows());
    const double mmd = mmd_squared(x.topRows(r), y.topRows(r), kernel);
    const double threshold = accept_threshold(r, k_bound, options.delta_prime);
    est.mmd_by_shift.push_back(mmd);
    est.threshold_by_shift.push_back(threshold);
    below[static_cast<std::size_t>(a - 1)] = mmd < threshold;
  }

  for (int a = 1; a <= a_max; ++a) {
    const int last = std::min(a + options.window, a_max);
    bool stable = true;
    for (int b = a; b <= last && stable; ++b) stable = below[static_cast<std::size_t>(b - 1)];
    if (stable) {
      est.shift = a;
      est.satisfied = true;
      return est;
    }
  }
  est.shift = a_max;
  est.satisfied = false;
  return est;
}

double median_heuristic_lengthscale(const Points& data) {
  std::vector<double> dist;
  const Eigen::Index n = data.rows();
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (data.row(i) - data.row(j)).norm();
      if (d > 0.0) dist.push_back(d);
    }
  }
  if (dist.empty()) return 1.0;
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  const double upper = dist[mid];
  if (dist.size() % 2 == 1) return upper;
  const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double closed_form_gaussian_mmd(double mu_a, double sigma_a, double mu_b, double sigma_b,
                                double gamma, ClosedFormVariant variant) {
  if (!(sigma_a > 0.0) || !(sigma_b > 0.0) || !(gamma > 0.0))
    throw InputError("closed-form MMD needs positive sigmas and gamma");
  const double two_pi = 2.0 * std::numbers::pi;
  const double g2 = gamma * gamma;
  const double va = 2.0 * sigma_a * sigma_a + g2;
  const double vb = 2.0 * sigma_b * sigma_b + g2;
  const double vab = sigma_a * sigma_a + sigma_b * sigma_b + g2;

  double ea = 0.0;
  double eb = 0.0;
  double eab = 0.0;
  if (variant == ClosedFormVariant::as_printed) {
    ea = 2.0 * mu_a * mu_a / (2.0 * va);
    eb = 2.0 * mu_b * mu_b / (2.0 * vb);
    eab = (mu_a + mu_b) * (mu_a + mu_b) / (2.0 * vab);
  } else {
    eab = -(mu_a - mu_b) * (mu_a - mu_b) / (2.0 * vab);
  }
  return std::exp(ea) / std::sqrt(two_pi * va) + std::exp(eb) / std::sqrt(two_pi * vb) -
         2.0 * std::exp(eab) / std::sqrt(two_pi * vab);
}

double gaussian_mmd_population(double mu_a, double sigma_a, double mu_b, double sigma_b,
                               double gamma, double magnitude) {
  return magnitude * magnitude * std::sqrt(2.0 * std::numbers::pi) * gamma *
         closed_form_gaussian_mmd(mu_a, sigma_a, mu_b, sigma_b, gamma,
                                  ClosedFormVariant::reconciled);
}

}  // namespace ctxsafe

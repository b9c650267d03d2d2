// Copyright 2026 The dpdfd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpdfd/accountant.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dpdfd/errors.h"

namespace dpdfd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ValidationError("delta must lie in (0, 1)");
  }
}

std::int64_t total_queries(std::int64_t batch, std::int64_t iterations) {
  if (batch < 0 || iterations < 0) {
    throw ValidationError("batch and iterations must be nonnegative");
  }
  if (batch != 0 &&
      iterations > std::numeric_limits<std::int64_t>::max() / batch) {
    throw ValidationError("query count B * T overflows");
  }
  return batch * iterations;
}

// Per-query RDP slope eps_rdp(lambda) / lambda; +inf without noise.
double slope(const AccountingParams& p) {
  if (p.noise_scale == 0.0) return kInf;
  const double n = static_cast<double>(p.classes);
  const double s2 = p.noise_scale * p.noise_scale;
  return p.mode == AccountingMode::kScaled
             ? 2.0 * p.norm_bound * p.norm_bound * n / s2
             : 2.0 * n / s2;
}

EpsilonResult minimize(double per_query_slope, std::int64_t queries,
                       double delta, std::span<const double> grid) {
  if (grid.empty()) throw ValidationError("lambda grid is empty");
  EpsilonResult best;
  if (queries == 0) return best;  // nothing released
  if (std::isinf(per_query_slope)) {
    best.epsilon = kInf;
    best.lambda_star = grid.front();
    return best;
  }
  best.epsilon = kInf;
  for (double lambda : grid) {
    const double eps =
        rdp_to_dp(compose(per_query_slope * lambda, queries, 1), lambda, delta);
    if (eps < best.epsilon) {
      best.epsilon = eps;
      best.lambda_star = lambda;
    }
  }
  if (best.epsilon < 0.0) {
    best.epsilon = 0.0;
    best.clamped = true;
  }
  return best;
}

}  // namespace

std::string_view accounting_mode_name(AccountingMode m) {
  return m == AccountingMode::kScaled ? "scaled" : "consistent";
}

AccountingMode parse_accounting_mode(std::string_view name) {
  if (name == "scaled") return AccountingMode::kScaled;
  if (name == "consistent") return AccountingMode::kConsistent;
  throw ValidationError("accounting must be scaled or consistent, got '" +
                        std::string(name) + "'");
}

void AccountingParams::validate() const {
  if (!(norm_bound > 0.0) || !std::isfinite(norm_bound)) {
    throw ValidationError("C must be positive and finite");
  }
  if (classes < 1) throw ValidationError("n must be at least 1");
  if (batch < 1) throw ValidationError("B must be at least 1");
  if (iterations < 0) throw ValidationError("T must be nonnegative");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw ValidationError("sigma must be nonnegative and finite");
  }
  check_delta(delta);
  total_queries(batch, iterations);
}

double sensitivity(double norm_bound, std::int64_t classes) {
  if (!(norm_bound > 0.0) || !std::isfinite(norm_bound)) {
    throw ValidationError("C must be positive and finite");
  }
  if (classes < 1) throw ValidationError("n must be at least 1");
  return 2.0 * norm_bound * std::sqrt(static_cast<double>(classes));
}

double rdp_per_query(const AccountingParams& params, double lambda) {
  if (!(lambda > 1.0)) {
    throw DomainError("RDP order lambda must exceed 1");
  }
  params.validate();
  return slope(params) * lambda;
}

double compose(double per_query, std::int64_t batch, std::int64_t iterations) {
  const std::int64_t q = total_queries(batch, iterations);
  if (q == 0) return 0.0;
  return per_query * static_cast<double>(q);
}

double rdp_to_dp(double eps_rdp, double lambda, double delta) {
  if (!(lambda > 1.0)) throw ValidationError("lambda must exceed 1");
  check_delta(delta);
  if (!(eps_rdp >= 0.0)) throw ValidationError("RDP epsilon must be >= 0");
  return eps_rdp + std::log((lambda - 1.0) / lambda) -
         (std::log(delta) + std::log(lambda)) / (lambda - 1.0);
}

std::vector<double> coarse_lambda_grid() {
  std::vector<double> g{1.5};
  for (int l = 2; l <= 64; ++l) g.push_back(l);
  for (int l = 128; l <= 1024; l *= 2) g.push_back(l);
  return g;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> g = coarse_lambda_grid();
  for (int k = 12; k <= 512; ++k) g.push_back(k / 8.0);
  for (int l = 65; l <= 1024; ++l) g.push_back(l);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

EpsilonResult optimal_epsilon(const AccountingParams& params,
                              std::span<const double> lambda_grid) {
  params.validate();
  for (double l : lambda_grid) {
    if (!(l > 1.0)) throw DomainError("lambda grid values must exceed 1");
  }
  return minimize(slope(params), total_queries(params.batch, params.iterations),
                  params.delta, lambda_grid);
}

double calibrate_sigma(double target_epsilon, AccountingParams params,
                       std::span<const double> lambda_grid,
                       const SigmaSearch& search) {
  if (!(target_epsilon > 0.0)) {
    throw ValidationError("target epsilon must be positive");
  }
  if (!(search.lower > 0.0 && search.upper > search.lower)) {
    throw ValidationError("sigma search bounds must satisfy 0 < lo < hi");
  }
  auto eps_at = [&](double sigma) {
    params.noise_scale = sigma;
    return optimal_epsilon(params, lambda_grid).epsilon;
  };
  double lo = search.lower;
  double hi = search.upper;
  if (eps_at(lo) <= target_epsilon) return lo;
  if (eps_at(hi) > target_epsilon) {
    throw InfeasibleError("target epsilon " + std::to_string(target_epsilon) +
                          " is unreachable for sigma <= " +
                          std::to_string(hi));
  }
  // Invariant: eps(lo) > target >= eps(hi).
  while ((hi - lo) > search.relative_tolerance * hi) {
    const double mid = std::sqrt(lo * hi);
    if (eps_at(mid) <= target_epsilon) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::int64_t max_iterations(double budget_epsilon, AccountingParams params,
                            std::span<const double> lambda_grid) {
  if (!(budget_epsilon > 0.0)) {
    throw ValidationError("epsilon budget must be positive");
  }
  auto eps_at = [&](std::int64_t t) {
    params.iterations = t;
    return optimal_epsilon(params, lambda_grid).epsilon;
  };
  if (eps_at(1) > budget_epsilon) {
    throw InfeasibleError("a single iteration costs epsilon " +
                          std::to_string(eps_at(1)) + " > budget " +
                          std::to_string(budget_epsilon));
  }
  std::int64_t lo = 1;  // affordable
  std::int64_t hi = 2;
  while (hi < kMaxIterationsCap && eps_at(hi) <= budget_epsilon) {
    lo = hi;
    hi = std::min(hi * 2, kMaxIterationsCap);
  }
  if (hi == kMaxIterationsCap && eps_at(hi) <= budget_epsilon) return hi;
  // Invariant: eps(lo) <= budget < eps(hi).
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (eps_at(mid) <= budget_epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

PrivacyLedger::PrivacyLedger(const AccountingParams& params,
                             std::vector<double> grid)
    : grid_(std::move(grid)) {
  params.validate();
  if (grid_.empty()) throw ValidationError("lambda grid is empty");
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    if (!(grid_[i] > 1.0) || (i > 0 && !(grid_[i] > grid_[i - 1]))) {
      throw ValidationError(
          "lambda grid must be strictly increasing and above 1");
    }
  }
  coefficient_ = slope(params);
}

void PrivacyLedger::charge(std::int64_t queries) {
  if (queries < 0) throw ValidationError("cannot charge negative queries");
  queries_ += queries;
}

EpsilonResult PrivacyLedger::epsilon(double delta) const {
  check_delta(delta);
  return minimize(coefficient_, queries_, delta, grid_);
}

}  // namespace dpdfd

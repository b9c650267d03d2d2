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

#ifndef DPDFD_ACCOUNTANT_H_
#define DPDFD_ACCOUNTANT_H_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dpdfd {

// kScaled charges 2 C^2 n lambda / sigma^2 per query. kConsistent charges
// 2 n lambda / sigma^2, which is what the Gaussian-mechanism bound gives when
// the sensitivity 2 C sqrt(n) meets noise of standard deviation sigma * C.
enum class AccountingMode { kScaled, kConsistent };

std::string_view accounting_mode_name(AccountingMode m);
AccountingMode parse_accounting_mode(std::string_view name);

struct AccountingParams {
  double norm_bound = 1e-3;    // C
  std::int64_t classes = 10;   // n, the length of each sanitized gradient
  std::int64_t batch = 256;    // B, queries per iteration
  std::int64_t iterations = 1; // T
  double noise_scale = 100.0;  // sigma
  double delta = 1e-5;
  AccountingMode mode = AccountingMode::kScaled;

  void validate() const;
};

// L2 sensitivity of one normalized gradient of length n: 2 C sqrt(n).
double sensitivity(double norm_bound, std::int64_t classes);

// RDP of a single query at order lambda.
double rdp_per_query(const AccountingParams& params, double lambda);

// per_query * B * T.
double compose(double per_query, std::int64_t batch, std::int64_t iterations);

// eps_rdp + log((lambda - 1) / lambda) - (log delta + log lambda) / (lambda - 1)
double rdp_to_dp(double eps_rdp, double lambda, double delta);

// {1.5, 2, 3, ..., 64, 128, 256, 512, 1024}.
std::vector<double> coarse_lambda_grid();
// Coarse grid merged with a fixed fine grid (step 1/8 on [1.5, 64], step 1 on
// [64, 1024]). The grid does not depend on the parameters, so epsilon stays
// exactly monotone in T, B, C, n and sigma.
std::vector<double> default_lambda_grid();

struct EpsilonResult {
  double epsilon = 0.0;
  double lambda_star = 0.0;
  // Set when the closed form dipped below zero and epsilon was clamped to 0.
  bool clamped = false;
};

// Minimum over the grid of rdp_to_dp(compose(rdp_per_query(lambda))).
EpsilonResult optimal_epsilon(const AccountingParams& params,
                              std::span<const double> lambda_grid);

struct SigmaSearch {
  double lower = 1e-3;
  double upper = 1e7;
  double relative_tolerance = 1e-4;
};

// Smallest sigma (to relative tolerance) with optimal_epsilon <= target.
// params.noise_scale is ignored.
double calibrate_sigma(double target_epsilon, AccountingParams params,
                       std::span<const double> lambda_grid,
                       const SigmaSearch& search = {});

inline constexpr std::int64_t kMaxIterationsCap = 1'000'000'000'000;

// Largest T with optimal_epsilon(T) <= budget; throws InfeasibleError when a
// single iteration already exceeds it. Capped at kMaxIterationsCap.
std::int64_t max_iterations(double budget_epsilon, AccountingParams params,
                            std::span<const double> lambda_grid);

// Running count of teacher queries with the per-query RDP slope
// eps_rdp(lambda) / lambda.
class PrivacyLedger {
 public:
  PrivacyLedger(const AccountingParams& params, std::vector<double> grid);

  void charge(std::int64_t queries);
  std::int64_t queries_composed() const { return queries_; }
  double per_query_coefficient() const { return coefficient_; }
  const std::vector<double>& lambda_grid() const { return grid_; }
  EpsilonResult epsilon(double delta) const;

 private:
  std::int64_t queries_ = 0;
  double coefficient_ = 0.0;
  std::vector<double> grid_;
};

}  // namespace dpdfd

#endif  // DPDFD_ACCOUNTANT_H_

// Copyright 2026 The Mushy Authors
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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mushy/limit_flow.hpp"
#include "mushy/params.hpp"
#include "mushy/rational.hpp"
#include "mushy/structured_flow.hpp"

namespace mushy::experiments {

struct ConvergenceOptions {
  int probes = 3000;       // uniform probe times i T / probes
  double exclusion = 5e-4;  // probes this close to a limit event are skipped
  double dt = 1e-4;         // limit integrator window
  flow::Mode mode = flow::Mode::ClosedForm;
  int workers = 1;
};

// One row per eps: the sup error over the probes, with the probe where it is
// attained.
struct ConvergenceRow {
  Rational eps;
  Rational tau;
  double t_probe = 0;
  double L1_discrete = 0;
  double L1_limit = 0;
  double err = 0;
  int probes_used = 0;
  int flagged = 0;  // probes dropped near events
  int steps = 0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::vector<double> ratios;  // err[i] / err[i + 1]
  bool monotone = true;
};

// L1 horizontal, L2 vertical; tau = gamma eps for every row.
ConvergenceTable convergence_run(const Rational& L1, const Rational& L2, const Rational& alpha, const Rational& beta,
                                 const Rational& gamma, const std::vector<Rational>& eps_list, double T,
                                 const ConvergenceOptions& opt = {});

struct AlgebraOptions {
  std::int64_t hmax = 5;
  std::int64_t kmax = 5;
  bool omit_rho_pi = false;  // fault injection: drop the rho1 correction
};

struct AlgebraMismatch {
  char family = 'f';  // 'f' retain candidates, 'g' dissolve candidates
  std::int64_t h = 0;
  std::int64_t k = 0;
  Rational closed;
  Rational direct;
};

struct AlgebraReport {
  flow::RectExtents ext;
  std::int64_t checked = 0;
  bool dissolve_checked = false;
  Rational max_discrepancy = 0;
  std::vector<AlgebraMismatch> mismatches;
};

// Compares the closed forms with lattice evaluation of the candidates over
// [0, hmax] x [0, kmax], clipped to [0, min(n1, n2) / 4]^2. L vertical, Lp
// horizontal.
AlgebraReport algebra_check(const Params& p, const Rational& L, const Rational& Lp, const AlgebraOptions& opt = {});

struct SweepPoint {
  Rational alpha;
  Rational beta;
  Rational gamma;
  Rational l;
};

struct SweepRow {
  SweepPoint point;
  Regime regime = Regime::WeakRetain;
  Rational eps;
  std::optional<std::int64_t> predicted;
  std::int64_t searched = 0;
  bool pinned = false;
  bool retains_islands = false;
  bool agree = false;
  std::string bracket;
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  int mismatches = 0;
  bool nonincreasing_in_l = true;
  bool nondecreasing_in_beta_gamma = true;
};

// Square of side l with eps = l / (2 m), m = max(half_cells, 64 (prediction + 1)^2).
SweepSummary regime_sweep(const std::vector<SweepPoint>& grid, std::int64_t half_cells = 100, int workers = 1);

std::string convergence_csv(const ConvergenceTable& t);
nlohmann::json to_json(const ConvergenceTable& t);
nlohmann::json to_json(const AlgebraReport& r);
std::string sweep_csv(const SweepSummary& s);
nlohmann::json to_json(const SweepSummary& s);

struct ReportInputs {
  std::vector<std::pair<std::string, Params>> threshold_sets;
  std::optional<SweepSummary> sweep;
  std::optional<ConvergenceTable> convergence;
  std::vector<std::pair<std::string, AlgebraReport>> algebra;
};

std::string markdown_report(const ReportInputs& in);

}  // namespace mushy::experiments

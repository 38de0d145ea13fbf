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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mushy/lattice.hpp"
#include "mushy/params.hpp"
#include "mushy/rational.hpp"

namespace mushy::flow {

using lattice::DiscreteSet;
using lattice::IntRect;
using lattice::RectState;
using mushy::to_json;
using mushy::to_string;

class RegimeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Lattice extents of the bulky rectangle. n1 is the horizontal extent
// (columns, moved by h), n2 the vertical one (rows, moved by k). The rho
// values are the sub-lattice remainders of the physical lengths.
struct RectExtents {
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  Rational rho1 = 0;
  Rational rho2 = 0;
  bool condo = true;  // the shorter side is resolved exactly

  // Physical lengths: L1 = eps (n1 + rho1) is horizontal, L2 the vertical one.
  Rational L1(const Rational& eps) const { return eps * (n1 + rho1); }
  Rational L2(const Rational& eps) const { return eps * (n2 + rho2); }
};

// Largest even integer not above floor(x / eps).
std::int64_t i_floor_even(const Rational& x, const Rational& eps);

// Horizontal length L1, vertical length L2.
RectExtents extents_from_lengths(const Rational& L1, const Rational& L2, const Rational& eps);
RectExtents extents_of(const IntRect& r);

// Core rectangle [2h, n1 - 2h] x [2k, n2 - 2k] (shifted to r's corner in the
// IntRect overload).
IntRect core_bounds(const IntRect& r, std::int64_t h, std::int64_t k);
DiscreteSet core_rect(std::int64_t h, std::int64_t k, const RectExtents& ext);

// Shrunken core plus every even site of I0.
DiscreteSet candidate_weak_retain(std::int64_t h, std::int64_t k, const DiscreteSet& I0, const RectExtents& ext);
// Shrunken core plus the even sites of C(N, N).
DiscreteSet candidate_weak_dissolve(std::int64_t s, std::int64_t t, const RectExtents& ext, std::int64_t n_ag);

std::int64_t n_alpha_gamma(const Rational& alpha, const Rational& gamma);

struct Thresholds {
  std::optional<Rational> lambda_c;  // present when 4ag <= 1
  std::optional<Rational> lambda_c_star;
  std::optional<Rational> lambda_minus;
  std::optional<Rational> lambda_plus;
  std::optional<std::int64_t> n_ag;  // present when 4ag >= 1
  Regime regime = Regime::WeakRetain;
  bool odd_integer_flag = false;
};

Thresholds thresholds(const Params& p);
nlohmann::json to_json(const Thresholds& t);

struct Centers {
  Rational m;
  Rational mu;
};
Centers closed_form_centers(const Rational& l, const Params& p);

class NonUniquePrediction : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Per-side displacement for an edge of length l.
std::int64_t predict_displacement(const Rational& l, const Params& p);

// Joint prediction (h, k) for vertical length L and horizontal length Lp,
// including the coupled exceptions at the thresholds. Several pairs are
// returned when the minimum is not unique.
std::vector<std::pair<std::int64_t, std::int64_t>> predict_pair(const Rational& L, const Rational& Lp, const Params& p);

// Polynomials of the closed-form energies. P and Q take the length l as their
// first argument. Symmetric R and r sort their arguments.
enum class Poly { Pi, P, R, SmallP, Q, SmallR, RAg, PiAg, SmallRAg, Overlap };
Rational poly_eval(Poly name, const std::vector<Rational>& args, const Params& p);
Poly poly_from_name(const std::string& name);

Rational pi_poly(std::int64_t x, const Params& p);
Rational P_poly(const Rational& l, std::int64_t x, const Params& p);
Rational R_poly(std::int64_t h, std::int64_t k, const Params& p);
Rational p_poly(std::int64_t x);
Rational Q_poly(const Rational& l, std::int64_t x, const Params& p);
Rational r_poly(std::int64_t s, std::int64_t t, const Params& p);
Rational R_ag_poly(std::int64_t h, std::int64_t k, std::int64_t N, const Params& p);
Rational pi_ag_poly(std::int64_t k, std::int64_t N, const Params& p);
Rational r_ag_poly(std::int64_t h, std::int64_t t, std::int64_t N, const Params& p);
// Dissipation over-count for edge strips deeper than half the other side
// (x is the displacement, m the lattice extent of the other side).
Rational overlap_poly(std::int64_t x, std::int64_t m);

// Normalized step energies (1/eps)(E(candidate, I0) - F(I0)) of the retain and
// dissolve candidates. L is vertical, Lp horizontal. Valid on the full index
// box [0, n1/4] x [0, n2/4]; g also needs min(n1, n2) >= 4 N.
Rational f_eps(std::int64_t h, std::int64_t k, const Rational& L, const Rational& Lp, const RectExtents& ext,
               const Params& p);
Rational g_eps(std::int64_t s, std::int64_t t, const Rational& L, const Rational& Lp, const RectExtents& ext,
               const Params& p);

enum class Mode { Direct, ClosedForm };
enum class CondoMode { Strict, Loose };

struct Move {
  std::int64_t h = 0;
  std::int64_t k = 0;
  bool vanish = false;
  int variant = 0;  // 1: even sites kept from C(N-1, N-1) (odd-integer 4ag)
  bool operator==(const Move&) const = default;
};

struct StepOptions {
  Mode mode = Mode::ClosedForm;
  int workers = 1;
  bool cross_check = false;  // also run the other mode and compare
  // Restrict the (h, k) scan to a square window; vanishing is always scanned.
  std::optional<std::pair<std::int64_t, std::int64_t>> window_center;
  std::int64_t window_radius = 0;
};

struct StepOutcome {
  Move move;
  Rational value;  // minimal normalized step energy
  std::vector<Move> ties;  // all co-minimal moves, chosen one first
  bool pinned = false;
  bool vanished = false;
  std::optional<std::pair<std::int64_t, std::int64_t>> predicted;
  bool agree = false;
  bool localized = true;
  std::optional<bool> modes_agree;
  bool boundary_regime = false;
};

// L, Lp of the first step carry the rho remainders; later steps use eps * n.
StepOutcome step_minimize(const RectState& state, const RectExtents& ext, const Params& p,
                          const StepOptions& opt = {});
StepOutcome step_minimize(const RectState& state, const Params& p, const StepOptions& opt = {});

// Exact normalized value of one move evaluated on the lattice.
Rational direct_value(const RectState& state, const Move& mv, const Params& p);
DiscreteSet build_candidate(const RectState& state, const Move& mv, const Params& p);
RectState apply_move(const RectState& state, const Move& mv, const Params& p);

struct StepRecord {
  int step = 0;
  RectState state;  // state after the step
  StepOutcome outcome;
  Rational energy;  // perimeter energy of state
};

struct EvolveOptions {
  StepOptions step;
  CondoMode condo = CondoMode::Loose;
};

struct Evolution {
  RectExtents initial_extents;
  RectState initial;
  Rational initial_energy;
  std::vector<StepRecord> steps;
  bool pinned = false;
  bool vanished = false;
  bool all_localized = true;  // over the non-vanishing steps
  bool early_vanish = false;   // the bulk vanished by a step outside the guard
  bool all_agree = true;  // predictor agreement over non-tie steps
};

// L1 horizontal, L2 vertical. Stops on pinning, vanishing or max_steps.
Evolution evolve(const Rational& L1, const Rational& L2, const Params& p, int max_steps, const EvolveOptions& opt = {});

Rational rect_perimeter_energy(const RectState& s, const Params& p);

std::string trace_csv(const Evolution& ev);
nlohmann::json trace_json(const Evolution& ev, const Params& p);
nlohmann::json to_json(const StepOutcome& o);

}  // namespace mushy::flow

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

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mushy/params.hpp"

namespace mushy::limit {

struct SideLengths {
  double L1 = 0;  // horizontal
  double L2 = 0;  // vertical
};

// Displacement count of an edge whose adjacent side has length l: the floor
// form with the slower value taken at exact integer arguments, never negative.
// Boundary is treated as WeakRetain; both laws coincide there.
double displacement_count(double l, const Params& p, Regime law);

// dL1/dt as a function of L2 (and symmetrically).
double rhs(double L_other, const Params& p, Regime law);
double rhs(double L_other, const Params& p);

double pinning_threshold(const Params& p);

// Normal velocity of an edge with crystalline curvature kappa = 2 / L.
double curvature_velocity(double kappa, const Params& p, Regime law);
double curvature_velocity(double kappa, const Params& p);

double rhs_infinite_gamma(double L_other, const Params& p);
double crystalline_reference(double L_other, const Params& p);

enum class EventKind { FloorJump, Pinned, Vanished };
std::string to_string(EventKind k);

struct Event {
  double t = 0;
  EventKind kind = EventKind::FloorJump;
  int side = 0;  // 1 or 2 for a velocity jump of that side, 0 otherwise
};

struct LimitTrace {
  std::vector<double> times;
  std::vector<SideLengths> states;
  std::vector<Event> events;
  bool pinned = false;
  std::optional<double> vanish_time;

  // Piecewise-linear reconstruction; (0, 0) after vanishing.
  SideLengths at(double t) const;
  // Distance from t to the nearest velocity jump or vanishing time.
  double distance_to_event(double t) const;
};

struct IntegrateOptions {
  std::optional<Regime> law;  // default: regime of the parameters
  int max_splits = 16;        // resolved events per dt window before sub-stepping
};

LimitTrace integrate(SideLengths L0, const Params& p, double T, double dt, const IntegrateOptions& opt = {});

std::string trace_csv(const LimitTrace& tr);
nlohmann::json trace_json(const LimitTrace& tr);

}  // namespace mushy::limit

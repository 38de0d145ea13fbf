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

#include "mushy/limit_flow.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mushy/rational.hpp"

namespace mushy::limit {

double displacement_count(double l, const Params& p, Regime law) {
  if (!(l > 0) || !std::isfinite(l)) throw std::invalid_argument("side length must be positive and finite");
  const Rational L(l);
  const Rational bg = p.beta * p.gamma;
  Rational x = 2 * bg / (3 * L) - 2 * p.alpha * p.gamma / 3 + Rational(1, 6);
  if (law == Regime::WeakDissolve) x = std::max(x, Rational(bg / (2 * L) + Rational(1, 4)));
  // ceil(x) - 1 is floor(x) except at integers, where the smaller count wins.
  const Integer c = ceil_of(x) - 1;
  return c > 0 ? c.get_d() : 0.0;
}

double rhs(double L_other, const Params& p, Regime law) { return -2.0 * curvature_velocity(2.0 / L_other, p, law); }

double rhs(double L_other, const Params& p) { return rhs(L_other, p, regime_of(p)); }

double pinning_threshold(const Params& p) {
  const Rational bg = p.beta * p.gamma;
  if (p.four_alpha_gamma() < 1) return to_double(Rational(4 * bg / (p.four_alpha_gamma() + 5)));
  return to_double(Rational(2 * bg / 3));
}

double curvature_velocity(double kappa, const Params& p, Regime law) {
  if (kappa < 0) throw std::invalid_argument("curvature must be nonnegative");
  if (kappa == 0) return 0.0;
  return 2.0 * displacement_count(2.0 / kappa, p, law) / to_double(p.gamma);
}

double curvature_velocity(double kappa, const Params& p) { return curvature_velocity(kappa, p, regime_of(p)); }

double rhs_infinite_gamma(double L_other, const Params& p) {
  if (!(L_other > 0)) throw std::invalid_argument("side length must be positive");
  const double a = to_double(p.alpha), b = to_double(p.beta);
  return -std::max(8.0 / 3.0 * (b / L_other - a), 2.0 * b / L_other);
}

double crystalline_reference(double L_other, const Params& p) {
  if (!(L_other > 0)) throw std::invalid_argument("side length must be positive");
  return -2.0 * to_double(p.beta) / L_other;
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::FloorJump:
      return "FloorJump";
    case EventKind::Pinned:
      return "Pinned";
    case EventKind::Vanished:
      return "Vanished";
  }
  return "?";
}

SideLengths LimitTrace::at(double t) const {
  if (times.empty()) return {};
  if (vanish_time && t >= *vanish_time) return {0.0, 0.0};
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
  const double w = (t - times[i]) / (times[i + 1] - times[i]);
  return {states[i].L1 + w * (states[i + 1].L1 - states[i].L1), states[i].L2 + w * (states[i + 1].L2 - states[i].L2)};
}

double LimitTrace::distance_to_event(double t) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& e : events) {
    if (e.kind != EventKind::Pinned) d = std::min(d, std::abs(t - e.t));
  }
  return d;
}

namespace {

struct Counts {
  double c1 = 0;  // drives L1, depends on L2
  double c2 = 0;
  bool operator==(const Counts&) const = default;
};

}  // namespace

LimitTrace integrate(SideLengths L0, const Params& p, double T, double dt, const IntegrateOptions& opt) {
  if (!(T > 0) || !(dt > 0)) throw std::invalid_argument("T and dt must be positive");
  if (!(L0.L1 > 0) || !(L0.L2 > 0)) throw std::invalid_argument("initial side lengths must be positive");
  const Regime law = opt.law.value_or(regime_of(p));
  const double g = to_double(p.gamma);
  auto counts = [&](const SideLengths& s) {
    return Counts{displacement_count(s.L2, p, law), displacement_count(s.L1, p, law)};
  };
  auto advance = [](const SideLengths& s, double v1, double v2, double h) {
    return SideLengths{s.L1 + v1 * h, s.L2 + v2 * h};
  };

  LimitTrace tr;
  double t = 0;
  SideLengths L = L0;
  tr.times.push_back(t);
  tr.states.push_back(L);
  const double tol = dt * 1e-9;

  while (t < T) {
    const double window_end = std::min(t + dt, T);
    int splits = 0;
    double sub = 0;  // fixed sub-step once the split budget is spent
    while (t < window_end) {
      const Counts c = counts(L);
      const double v1 = -4.0 * c.c1 / g, v2 = -4.0 * c.c2 / g;
      if (v1 == 0 && v2 == 0) {
        tr.pinned = true;
        tr.events.push_back({t, EventKind::Pinned, 0});
        tr.times.push_back(T);
        tr.states.push_back(L);
        return tr;
      }
      double s_v = std::numeric_limits<double>::infinity();
      if (v1 < 0) s_v = std::min(s_v, L.L1 / -v1);
      if (v2 < 0) s_v = std::min(s_v, L.L2 / -v2);
      double span = window_end - t;
      if (splits >= opt.max_splits) {
        if (sub == 0) sub = span / std::max(1, opt.max_splits);
        span = std::min(span, sub);
      }
      const bool hits_zero = s_v <= span;
      span = std::min(span, s_v);

      double jump = -1;
      if (splits < opt.max_splits) {
        const double probe = hits_zero ? span * (1 - 1e-12) : span;
        const SideLengths end = advance(L, v1, v2, probe);
        if (end.L1 > 0 && end.L2 > 0 && !(counts(end) == c)) {
          double lo = 0, hi = probe;
          while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            if (counts(advance(L, v1, v2, mid)) == c) {
              lo = mid;
            } else {
              hi = mid;
            }
          }
          jump = hi;
        }
      }
      if (jump >= 0) {
        const SideLengths next = advance(L, v1, v2, jump);
        const Counts nc = counts(next);
        t += jump;
        L = next;
        ++splits;
        if (!(nc.c1 == c.c1)) tr.events.push_back({t, EventKind::FloorJump, 1});
        if (!(nc.c2 == c.c2)) tr.events.push_back({t, EventKind::FloorJump, 2});
        tr.times.push_back(t);
        tr.states.push_back(L);
        continue;
      }
      if (hits_zero) {
        t += s_v;
        tr.vanish_time = t;
        tr.events.push_back({t, EventKind::Vanished, 0});
        tr.times.push_back(t);
        tr.states.push_back({0.0, 0.0});
        return tr;
      }
      L = advance(L, v1, v2, span);
      t = span == window_end - t ? window_end : t + span;
      tr.times.push_back(t);
      tr.states.push_back(L);
    }
  }
  return tr;
}

std::string trace_csv(const LimitTrace& tr) {
  std::ostringstream os;
  os << std::setprecision(17) << "t,L1,L2,event\n";
  std::size_t e = 0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    std::string ev;
    while (e < tr.events.size() && tr.events[e].t <= tr.times[i]) {
      if (!ev.empty()) ev += ';';
      ev += to_string(tr.events[e].kind);
      ++e;
    }
    os << tr.times[i] << ',' << tr.states[i].L1 << ',' << tr.states[i].L2 << ',' << ev << '\n';
  }
  return os.str();
}

nlohmann::json trace_json(const LimitTrace& tr) {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t i = 0; i < tr.times.size(); ++i) pts.push_back({tr.times[i], tr.states[i].L1, tr.states[i].L2});
  nlohmann::json evs = nlohmann::json::array();
  for (const auto& e : tr.events) evs.push_back({{"t", e.t}, {"kind", to_string(e.kind)}, {"side", e.side}});
  return {{"points", pts},
          {"events", evs},
          {"pinned", tr.pinned},
          {"vanish_time", tr.vanish_time ? nlohmann::json(*tr.vanish_time) : nlohmann::json(nullptr)}};
}

}  // namespace mushy::limit

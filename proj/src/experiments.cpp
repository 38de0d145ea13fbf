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

#include "mushy/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "mushy/lattice.hpp"

namespace mushy::experiments {
namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads; results stay indexed.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers))));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += w) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

ConvergenceTable convergence_run(const Rational& L1, const Rational& L2, const Rational& alpha, const Rational& beta,
                                 const Rational& gamma, const std::vector<Rational>& eps_list, double T,
                                 const ConvergenceOptions& opt) {
  if (eps_list.empty()) throw std::invalid_argument("eps list is empty");
  if (!(T > 0)) throw std::invalid_argument("T must be positive");
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] < eps_list[i - 1])) throw std::invalid_argument("eps list must be decreasing");
  }
  const Params p0 = Params::with_gamma(alpha, beta, eps_list.front(), gamma);
  const limit::LimitTrace lim = limit::integrate({to_double(L1), to_double(L2)}, p0, T * (1 + 1e-9), opt.dt);

  ConvergenceTable table;
  table.rows.resize(eps_list.size());
  parallel_for(eps_list.size(), opt.workers, [&](std::size_t i) {
    const Rational& eps = eps_list[i];
    const Params p = Params::with_gamma(alpha, beta, eps, gamma);
    const double tau = to_double(p.tau);
    const int max_steps = static_cast<int>(std::ceil(T / tau)) + 2;
    flow::EvolveOptions eo;
    eo.step.mode = opt.mode;
    const flow::Evolution ev = flow::evolve(L1, L2, p, max_steps, eo);

    // Lattice extents after n steps; the last state persists after pinning.
    auto scaled = [&](std::int64_t n) { return to_double(Rational(eps * make_rational(n))); };
    std::vector<std::pair<double, double>> sides{{scaled(ev.initial_extents.n1), scaled(ev.initial_extents.n2)}};
    for (const auto& s : ev.steps) {
      if (s.state.rect.empty()) {
        sides.emplace_back(0.0, 0.0);
      } else {
        sides.emplace_back(scaled(s.state.rect.width()), scaled(s.state.rect.height()));
      }
    }

    ConvergenceRow row;
    row.eps = eps;
    row.tau = p.tau;
    row.steps = static_cast<int>(ev.steps.size());
    for (int k = 0; k <= opt.probes; ++k) {
      const double t = T * k / opt.probes;
      if (lim.distance_to_event(t) < opt.exclusion) {
        ++row.flagged;
        continue;
      }
      const auto n = static_cast<std::size_t>(std::floor(t / tau + 1e-9));
      const auto d = sides[std::min(n, sides.size() - 1)];
      const limit::SideLengths l = lim.at(t);
      const double err = std::max(std::abs(d.first - l.L1), std::abs(d.second - l.L2));
      ++row.probes_used;
      if (err > row.err || row.probes_used == 1) {
        row.err = err;
        row.t_probe = t;
        row.L1_discrete = d.first;
        row.L1_limit = l.L1;
      }
    }
    table.rows[i] = row;
  });
  for (std::size_t i = 0; i + 1 < table.rows.size(); ++i) {
    const double a = table.rows[i].err, b = table.rows[i + 1].err;
    table.ratios.push_back(b > 0 ? a / b : std::numeric_limits<double>::infinity());
    if (b > a) table.monotone = false;
  }
  return table;
}

AlgebraReport algebra_check(const Params& p, const Rational& L, const Rational& Lp, const AlgebraOptions& opt) {
  AlgebraReport rep;
  rep.ext = flow::extents_from_lengths(Lp, L, p.eps);
  const auto& ext = rep.ext;
  const lattice::DiscreteSet I0 = lattice::DiscreteSet::from_rect({0, ext.n1, 0, ext.n2});
  const Rational F0 = lattice::perimeter_energy(I0, p).value;
  const std::int64_t hmax = std::min(opt.hmax, ext.n1 / 4), kmax = std::min(opt.kmax, ext.n2 / 4);
  const std::int64_t N = p.four_alpha_gamma() >= 1 ? flow::n_alpha_gamma(p.alpha, p.gamma) : 0;
  // g presupposes a nonempty C(N, N).
  rep.dissolve_checked = N > 0 && std::min(ext.n1, ext.n2) >= 4 * N;
  const Rational eg = p.eps / p.gamma;

  auto record = [&](char fam, std::int64_t h, std::int64_t k, const Rational& closed, const Rational& direct) {
    ++rep.checked;
    Rational diff = closed - direct;
    if (diff < 0) diff = -diff;
    if (diff > rep.max_discrepancy) rep.max_discrepancy = diff;
    if (diff != 0) rep.mismatches.push_back({fam, h, k, closed, direct});
  };

  for (std::int64_t h = 0; h <= hmax; ++h) {
    for (std::int64_t k = 0; k <= kmax; ++k) {
      const auto cand = flow::candidate_weak_retain(h, k, I0, ext);
      const Rational direct = (lattice::step_energy(cand, I0, p).value - F0) / p.eps;
      Rational closed = flow::f_eps(h, k, L, Lp, ext, p);
      if (opt.omit_rho_pi) closed += eg * ext.rho1 * flow::pi_poly(k, p);
      record('f', h, k, closed, direct);
      if (!rep.dissolve_checked) continue;
      const auto jc = flow::candidate_weak_dissolve(h, k, ext, N);
      const Rational gdirect = (lattice::step_energy(jc, I0, p).value - F0) / p.eps;
      Rational gclosed = flow::g_eps(h, k, L, Lp, ext, p);
      if (opt.omit_rho_pi && ext.rho1 != 0) {
        gclosed += eg * ext.rho1 * (k <= N ? flow::p_poly(k) : flow::pi_ag_poly(k - N, N, p));
      }
      record('g', h, k, gclosed, gdirect);
    }
  }
  return rep;
}

namespace {

std::string bracket_of(const Rational& l, const flow::Thresholds& th) {
  if (th.regime != Regime::WeakDissolve) return l > *th.lambda_c ? "l > lambda_c" : "l <= lambda_c";
  if (l > *th.lambda_plus) return "l > lambda_plus";
  if (l > *th.lambda_minus) return "lambda_minus < l <= lambda_plus";
  if (l > *th.lambda_c_star) return "lambda_c_star < l <= lambda_minus";
  return "l <= lambda_c_star";
}

}  // namespace

SweepSummary regime_sweep(const std::vector<SweepPoint>& grid, std::int64_t half_cells, int workers) {
  SweepSummary out;
  out.rows.resize(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t i) {
    const SweepPoint& g = grid[i];
    SweepRow row;
    row.point = g;
    const Params unit = Params::with_gamma(g.alpha, g.beta, 1, g.gamma);
    const auto th = flow::thresholds(unit);
    row.regime = th.regime;
    row.retains_islands = th.regime != Regime::WeakDissolve;
    row.bracket = bracket_of(g.l, th);
    std::int64_t guess = 0;
    try {
      row.predicted = flow::predict_displacement(g.l, unit);
      guess = *row.predicted;
    } catch (const flow::NonUniquePrediction&) {
      const Rational a = 2 * g.beta * g.gamma / (3 * g.l) + Rational(1, 4);
      guess = std::max<std::int64_t>(0, floor_int(a));
    }
    // The O(eps) term shifts the minimizer by about 4 h^2 / m cells here, so the
    // resolution grows with the expected displacement.
    const std::int64_t m = std::max(half_cells, 64 * (guess + 1) * (guess + 1));
    row.eps = g.l / (2 * m);
    const Params p = Params::with_gamma(g.alpha, g.beta, row.eps, g.gamma);
    const lattice::RectState st{{0, 2 * m, 0, 2 * m}, {}};
    flow::StepOptions so;
    so.mode = flow::Mode::ClosedForm;
    const auto o = flow::step_minimize(st, p, so);
    row.searched = o.vanished ? -1 : o.move.h;
    row.pinned = o.pinned;
    row.agree = row.predicted && !o.vanished && o.move.h == *row.predicted && o.move.k == *row.predicted;
    out.rows[i] = row;
  });

  std::map<std::tuple<std::string, std::string, std::string>, std::vector<const SweepRow*>> by_params;
  std::map<std::pair<std::string, std::string>, std::vector<const SweepRow*>> by_ag_l;
  for (const auto& r : out.rows) {
    if (r.predicted && !r.agree) ++out.mismatches;
    by_params[{to_string(r.point.alpha), to_string(r.point.beta), to_string(r.point.gamma)}].push_back(&r);
    by_ag_l[{to_string(Rational(r.point.alpha * r.point.gamma)), to_string(r.point.l)}].push_back(&r);
  }
  for (auto& [key, rows] : by_params) {
    std::sort(rows.begin(), rows.end(), [](const SweepRow* a, const SweepRow* b) { return a->point.l < b->point.l; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i]->searched > rows[i - 1]->searched) out.nonincreasing_in_l = false;
    }
  }
  for (auto& [key, rows] : by_ag_l) {
    std::sort(rows.begin(), rows.end(), [](const SweepRow* a, const SweepRow* b) {
      return a->point.beta * a->point.gamma < b->point.beta * b->point.gamma;
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i]->searched < rows[i - 1]->searched) out.nondecreasing_in_beta_gamma = false;
    }
  }
  return out;
}

std::string convergence_csv(const ConvergenceTable& t) {
  std::ostringstream os;
  os << std::setprecision(17) << "eps,tau,t_probe,L1_discrete,L1_limit,err,probes_used,flagged,steps\n";
  for (const auto& r : t.rows) {
    os << to_string(r.eps) << ',' << to_string(r.tau) << ',' << r.t_probe << ',' << r.L1_discrete << ','
       << r.L1_limit << ',' << r.err << ',' << r.probes_used << ',' << r.flagged << ',' << r.steps << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const ConvergenceTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"eps", mushy::to_json(r.eps)},
                    {"tau", mushy::to_json(r.tau)},
                    {"t_probe", r.t_probe},
                    {"L1_discrete", r.L1_discrete},
                    {"L1_limit", r.L1_limit},
                    {"err", r.err},
                    {"probes_used", r.probes_used},
                    {"flagged", r.flagged},
                    {"steps", r.steps}});
  }
  return {{"rows", rows}, {"ratios", t.ratios}, {"monotone", t.monotone}};
}

nlohmann::json to_json(const AlgebraReport& r) {
  nlohmann::json mm = nlohmann::json::array();
  for (const auto& m : r.mismatches) {
    mm.push_back({{"family", std::string(1, m.family)},
                  {"h", m.h},
                  {"k", m.k},
                  {"closed", mushy::to_json(m.closed)},
                  {"direct", mushy::to_json(m.direct)}});
  }
  return {{"n1", r.ext.n1},
          {"n2", r.ext.n2},
          {"rho1", mushy::to_json(r.ext.rho1)},
          {"rho2", mushy::to_json(r.ext.rho2)},
          {"condo", r.ext.condo},
          {"checked", r.checked},
          {"dissolve_checked", r.dissolve_checked},
          {"max_discrepancy", mushy::to_json(r.max_discrepancy)},
          {"mismatches", mm}};
}

std::string sweep_csv(const SweepSummary& s) {
  std::ostringstream os;
  os << "alpha,beta,gamma,l,regime,eps,predicted,searched,pinned,retains_islands,agree,bracket\n";
  for (const auto& r : s.rows) {
    os << to_string(r.point.alpha) << ',' << to_string(r.point.beta) << ',' << to_string(r.point.gamma) << ','
       << to_string(r.point.l) << ',' << to_string(r.regime) << ',' << to_string(r.eps) << ','
       << (r.predicted ? std::to_string(*r.predicted) : "") << ',' << r.searched << ',' << r.pinned << ','
       << r.retains_islands << ',' << r.agree << ',' << r.bracket << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const SweepSummary& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.rows) {
    rows.push_back({{"alpha", mushy::to_json(r.point.alpha)},
                    {"beta", mushy::to_json(r.point.beta)},
                    {"gamma", mushy::to_json(r.point.gamma)},
                    {"l", mushy::to_json(r.point.l)},
                    {"regime", to_string(r.regime)},
                    {"eps", mushy::to_json(r.eps)},
                    {"predicted", r.predicted ? nlohmann::json(*r.predicted) : nlohmann::json(nullptr)},
                    {"searched", r.searched},
                    {"pinned", r.pinned},
                    {"retains_islands", r.retains_islands},
                    {"agree", r.agree},
                    {"bracket", r.bracket}});
  }
  return {{"rows", rows},
          {"mismatches", s.mismatches},
          {"nonincreasing_in_l", s.nonincreasing_in_l},
          {"nondecreasing_in_beta_gamma", s.nondecreasing_in_beta_gamma}};
}

std::string markdown_report(const ReportInputs& in) {
  std::ostringstream os;
  os << "# Mushy-layer flow report\n";
  if (!in.threshold_sets.empty()) {
    os << "\n## Thresholds\n\n| set | 4ag | regime | lambda_c | lambda_c* | lambda- | lambda+ | N |\n"
       << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& [name, p] : in.threshold_sets) {
      const auto th = flow::thresholds(p);
      auto opt = [](const std::optional<Rational>& v) { return v ? to_string(*v) : std::string("-"); };
      os << "| " << name << " | " << to_string(p.four_alpha_gamma()) << " | " << to_string(th.regime) << " | "
         << opt(th.lambda_c) << " | " << opt(th.lambda_c_star) << " | " << opt(th.lambda_minus) << " | "
         << opt(th.lambda_plus) << " | " << (th.n_ag ? std::to_string(*th.n_ag) : "-") << " |\n";
    }
  }
  if (in.sweep) {
    os << "\n## Displacements\n\n| alpha | beta | gamma | l | bracket | predicted | searched |\n"
       << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : in.sweep->rows) {
      os << "| " << to_string(r.point.alpha) << " | " << to_string(r.point.beta) << " | " << to_string(r.point.gamma)
         << " | " << to_string(r.point.l) << " | " << r.bracket << " | "
         << (r.predicted ? std::to_string(*r.predicted) : "-") << " | " << r.searched << " |\n";
    }
    os << "\nmismatches: " << in.sweep->mismatches << ", nonincreasing in l: " << in.sweep->nonincreasing_in_l
       << ", nondecreasing in beta gamma: " << in.sweep->nondecreasing_in_beta_gamma << "\n";
  }
  if (in.convergence) {
    os << "\n## Convergence\n\n| eps | steps | probes | sup error | ratio |\n|---|---|---|---|---|\n";
    const auto& rows = in.convergence->rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      os << "| " << to_string(rows[i].eps) << " | " << rows[i].steps << " | " << rows[i].probes_used << " | "
         << fmt(rows[i].err) << " | " << (i == 0 ? std::string("-") : fmt(in.convergence->ratios[i - 1])) << " |\n";
    }
  }
  if (!in.algebra.empty()) {
    os << "\n## Closed forms against the lattice\n\n| configuration | checked | max discrepancy |\n|---|---|---|\n";
    for (const auto& [name, r] : in.algebra) {
      os << "| " << name << " | " << r.checked << " | " << to_string(r.max_discrepancy) << " |\n";
    }
  }
  return os.str();
}

}  // namespace mushy::experiments

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

#include <gtest/gtest.h>

#include <random>

#include "mushy/structured_flow.hpp"

namespace mushy::flow {
namespace {

using lattice::LatticePoint;

Params P(Rational alpha, Rational beta, Rational gamma, Rational eps) {
  return Params::with_gamma(std::move(alpha), std::move(beta), std::move(eps), std::move(gamma));
}

std::int64_t floor64(const Rational& x) { return floor_int(x); }

// Independent transcription of the displacement tables.
std::int64_t reference_displacement(const Rational& l, const Params& p) {
  const Rational ag = p.alpha * p.gamma, bg = p.beta * p.gamma;
  const Rational fag = 4 * ag;
  const Rational a = 2 * bg / (3 * l) - 2 * ag / 3 + Rational(1, 6);
  if (fag <= 1) {
    const Rational lc = 4 * bg / (fag + 5);
    return l > lc ? 0 : std::max<std::int64_t>(0, floor64(a));
  }
  const std::int64_t N = floor64((fag + 1) / 2);
  const Rational lstar = 4 * bg / (fag + 5 + 6 * N);
  const Rational lminus = 2 * bg / (4 * N - 1);
  const Rational lplus = 2 * bg / 3;
  if (l > lplus) return 0;
  if (l > lminus) return floor64(bg / (2 * l) + Rational(1, 4));
  if (l > lstar) return N;
  return floor64(a);
}

TEST(Extents, EvenFloorAndRemainders) {
  EXPECT_EQ(i_floor_even(Rational(2, 5), Rational(1, 100)), 40);
  EXPECT_EQ(i_floor_even(Rational(41, 100), Rational(1, 100)), 40);
  EXPECT_EQ(i_floor_even(Rational(39, 100), Rational(1, 100)), 38);
  EXPECT_EQ(i_floor_even(0, Rational(1, 3)), 0);
  const RectExtents e = extents_from_lengths(Rational(2, 5), Rational(43, 100), Rational(1, 100));
  EXPECT_EQ(e.n1, 40);
  EXPECT_EQ(e.n2, 42);
  EXPECT_EQ(e.rho1, 0);
  EXPECT_EQ(e.rho2, 1);
  EXPECT_TRUE(e.condo);
  EXPECT_EQ(e.L2(Rational(1, 100)), Rational(43, 100));
  const RectExtents f = extents_from_lengths(Rational(41, 100), Rational(1, 2), Rational(1, 100));
  EXPECT_FALSE(f.condo);
  EXPECT_THROW(extents_from_lengths(0, 1, Rational(1, 10)), std::invalid_argument);
}

TEST(Candidates, CoreRectangleShrinksByTwoPerUnit) {
  const IntRect r{0, 12, 0, 8};
  EXPECT_EQ(core_bounds(r, 1, 2), (IntRect{2, 10, 4, 4}));
  const RectExtents e = extents_of(r);
  EXPECT_EQ(core_rect(0, 0, e).size(), 13u * 9u);
  EXPECT_EQ(core_rect(2, 1, e), lattice::DiscreteSet::from_rect({4, 8, 2, 6}));
  EXPECT_NO_THROW(core_rect(3, 0, e));
  EXPECT_THROW(core_rect(4, 0, e), std::out_of_range);
  EXPECT_THROW(core_rect(0, 3, e), std::out_of_range);
}

TEST(Candidates, RetainKeepsEvenSitesOfThePreviousSet) {
  const IntRect r{0, 8, 0, 8};
  const auto I0 = lattice::DiscreteSet::from_rect(r);
  const auto c = candidate_weak_retain(1, 1, I0, extents_of(r));
  EXPECT_TRUE(lattice::is_subset(c, I0));
  EXPECT_TRUE(lattice::is_subset(lattice::DiscreteSet::from_rect({2, 6, 2, 6}), c));
  // Ring of depth 1 and 2 contributes its even sites: 16 of them.
  EXPECT_EQ(c.size(), 25u + 16u);
}

TEST(Candidates, DissolveKeepsOnlyDeepEvenSites) {
  const IntRect r{0, 16, 0, 16};
  const std::int64_t N = 2;
  const auto c = candidate_weak_dissolve(1, 1, extents_of(r), N);
  for (const auto& s : c) {
    if (lattice::DiscreteSet::from_rect({2, 14, 2, 14}).contains(s)) continue;
    EXPECT_TRUE(lattice::is_even_site(s));
    const std::int64_t depth = std::min({s.i1, s.i2, 16 - s.i1, 16 - s.i2});
    EXPECT_GE(depth, 2 * N);
  }
}

TEST(Thresholds, WeakRetainReference) {
  const Thresholds t = thresholds(P(Rational(1, 8), 1, 1, Rational(1, 100)));
  EXPECT_EQ(t.regime, Regime::WeakRetain);
  ASSERT_TRUE(t.lambda_c);
  EXPECT_EQ(*t.lambda_c, Rational(8, 11));
  EXPECT_FALSE(t.lambda_plus);
  EXPECT_FALSE(t.n_ag);
}

TEST(Thresholds, WeakDissolveFourAlphaGammaFour) {
  const Thresholds t = thresholds(P(1, 1, 1, Rational(1, 100)));
  EXPECT_EQ(t.regime, Regime::WeakDissolve);
  EXPECT_EQ(*t.n_ag, 2);
  EXPECT_EQ(*t.lambda_c_star, Rational(4, 21));
  EXPECT_EQ(*t.lambda_minus, Rational(2, 7));
  EXPECT_EQ(*t.lambda_plus, Rational(2, 3));
  EXPECT_FALSE(t.odd_integer_flag);
  EXPECT_TRUE(thresholds(P(Rational(3, 4), 1, 1, Rational(1, 100))).odd_integer_flag);
}

TEST(Thresholds, NAlphaGamma) {
  EXPECT_EQ(n_alpha_gamma(Rational(1, 4), 1), 1);
  EXPECT_EQ(n_alpha_gamma(1, 1), 2);
  EXPECT_EQ(n_alpha_gamma(Rational(1, 2), 1), 1);
  EXPECT_EQ(n_alpha_gamma(Rational(5, 4), 1), 3);
  EXPECT_THROW(n_alpha_gamma(Rational(1, 8), 1), RegimeError);
}

TEST(Predictor, KnownValues) {
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 100));
  EXPECT_EQ(predict_displacement(Rational(2, 5), p), 1);
  // At l = lambda_c the floor argument equals 1.
  EXPECT_EQ(predict_displacement(Rational(8, 11), p), 1);
  EXPECT_EQ(predict_displacement(Rational(4, 5), p), 0);
  EXPECT_EQ(predict_displacement(Rational(1, 10), p), 6);
  EXPECT_THROW(predict_displacement(0, p), std::invalid_argument);
  EXPECT_THROW(predict_displacement(Rational(1, 2), P(Rational(3, 4), 1, 1, Rational(1, 100))), NonUniquePrediction);
}

TEST(Predictor, MatchesReferenceAndIsMonotone) {
  const std::vector<std::pair<Rational, Rational>> ag = {
      {Rational(1, 8), 1}, {Rational(1, 16), 2}, {Rational(1, 4), 1}, {Rational(1, 2), 1},
      {1, 1},              {Rational(5, 8), 1},  {Rational(3, 2), 1}, {1, 2}};
  for (const auto& [alpha, gamma] : ag) {
    for (const Rational& beta : {Rational(1), Rational(1, 2), Rational(3)}) {
      const Params p = P(alpha, beta, gamma, Rational(1, 100));
      std::int64_t last = std::numeric_limits<std::int64_t>::max();
      for (int i = 1; i <= 400; ++i) {
        const Rational l(i, 100);
        const std::int64_t d = predict_displacement(l, p);
        EXPECT_EQ(d, reference_displacement(l, p)) << to_string(alpha) << " " << to_string(l);
        EXPECT_LE(d, last);
        EXPECT_GE(d, 0);
        last = d;
      }
    }
  }
}

TEST(Predictor, JointExceptionsAtThresholds) {
  const Params retain = P(Rational(1, 8), 1, 1, Rational(1, 100));
  using PairList = std::vector<std::pair<std::int64_t, std::int64_t>>;
  EXPECT_EQ(predict_pair(Rational(8, 11), 1, retain), (PairList{{0, 0}}));
  EXPECT_EQ(predict_pair(1, Rational(8, 11), retain), (PairList{{0, 0}}));
  EXPECT_EQ(predict_pair(Rational(8, 11), Rational(8, 11), retain), (PairList{{1, 1}}));
  EXPECT_EQ(predict_pair(Rational(8, 11), Rational(2, 5), retain), (PairList{{1, 1}}));
  const Params two = P(Rational(1, 2), 1, 1, Rational(1, 100));
  EXPECT_EQ(predict_pair(Rational(2, 3), 1, two), (PairList{{0, 0}, {1, 0}}));
  const Params four = P(1, 1, 1, Rational(1, 100));
  EXPECT_EQ(predict_pair(Rational(2, 3), 1, four), (PairList{{1, 0}}));
  const Params small = P(Rational(3, 8), 1, 1, Rational(1, 100));
  EXPECT_EQ(predict_pair(Rational(2, 3), 1, small), (PairList{{0, 0}}));
}

TEST(Polynomials, NamesAndArity) {
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 100));
  EXPECT_EQ(poly_from_name("pi"), Poly::Pi);
  EXPECT_EQ(poly_from_name("r_ag"), Poly::SmallRAg);
  EXPECT_THROW(poly_from_name("zeta"), std::invalid_argument);
  EXPECT_EQ(poly_eval(Poly::Pi, {Rational(2)}, p), pi_poly(2, p));
  EXPECT_THROW(poly_eval(Poly::Pi, {Rational(1, 2)}, p), std::invalid_argument);
  EXPECT_THROW(poly_eval(Poly::R, {Rational(1)}, p), std::invalid_argument);
  EXPECT_EQ(pi_poly(0, p), 0);
  EXPECT_EQ(p_poly(0), 0);
}

struct AlgebraCase {
  Rational alpha, beta, gamma, eps, L, Lp;
};

// The closed forms must equal the lattice energy of the materialized candidate
// over the whole index box, including strips deeper than half the other side.
TEST(Algebra, ClosedFormsEqualLatticeEnergy) {
  const std::vector<AlgebraCase> cases = {
      {Rational(1, 8), 1, 1, Rational(1, 40), Rational(2, 5), Rational(1, 2)},
      {Rational(1, 8), 1, 1, Rational(1, 40), Rational(21, 50), Rational(11, 20)},
      {Rational(1, 16), 2, 3, Rational(1, 30), Rational(7, 15), Rational(2, 5)},
      {Rational(1, 4), 1, 1, Rational(1, 40), Rational(2, 5), Rational(2, 5)},
      {1, 1, 1, Rational(1, 40), Rational(1, 2), Rational(3, 5)},
      {Rational(1, 2), 1, 1, Rational(1, 50), Rational(9, 20), Rational(12, 25)},
      {Rational(5, 8), 2, 1, Rational(1, 36), Rational(1, 2), Rational(5, 9)},
      {Rational(1, 8), 1, 2, Rational(1, 50), Rational(1, 5), Rational(3, 5)},
      {Rational(3, 4), 1, 1, Rational(1, 50), Rational(16, 25), Rational(1, 5)},
      {1, 3, 1, Rational(1, 50), Rational(6, 25), Rational(31, 50)},
  };
  for (const auto& c : cases) {
    const Params p = P(c.alpha, c.beta, c.gamma, c.eps);
    const RectExtents ext = extents_from_lengths(c.Lp, c.L, c.eps);
    RectState st;
    st.rect = IntRect{0, ext.n1, 0, ext.n2};
    const auto I0 = st.materialize();
    const bool dissolve = regime_of(p) != Regime::WeakRetain;
    for (std::int64_t h = 0; h <= ext.n1 / 4; ++h)
      for (std::int64_t k = 0; k <= ext.n2 / 4; ++k) {
        const auto cand = candidate_weak_retain(h, k, I0, ext);
        const Rational direct =
            (lattice::step_energy(cand, I0, p).value - lattice::perimeter_energy(I0, p).value) / p.eps;
        EXPECT_EQ(f_eps(h, k, c.L, c.Lp, ext, p), direct) << h << "," << k;
        if (dissolve && std::min(ext.n1, ext.n2) >= 4 * n_alpha_gamma(p.alpha, p.gamma)) {
          const std::int64_t N = n_alpha_gamma(p.alpha, p.gamma);
          const auto g = candidate_weak_dissolve(h, k, ext, N);
          const Rational gd =
              (lattice::step_energy(g, I0, p).value - lattice::perimeter_energy(I0, p).value) / p.eps;
          EXPECT_EQ(g_eps(h, k, c.L, c.Lp, ext, p), gd) << "g " << h << "," << k;
        }
      }
  }
}

RectState square_state(std::int64_t n) {
  RectState s;
  s.rect = IntRect{0, n, 0, n};
  return s;
}

TEST(StepMinimize, DirectAndClosedFormAgreeOnSmallConfigurations) {
  std::mt19937 rng(13);
  const std::vector<std::pair<Rational, Rational>> ag = {
      {Rational(1, 8), 1}, {Rational(1, 4), 1}, {1, 1}, {Rational(1, 2), 1}, {Rational(3, 4), 1}};
  for (const auto& [alpha, gamma] : ag) {
    for (int trial = 0; trial < 12; ++trial) {
      const std::int64_t n1 = 2 * std::uniform_int_distribution<int>(2, 12)(rng);
      const std::int64_t n2 = 2 * std::uniform_int_distribution<int>(2, 12)(rng);
      const Rational eps(1, std::uniform_int_distribution<int>(20, 60)(rng));
      const Params p = P(alpha, 1, gamma, eps);
      RectState s;
      s.rect = IntRect{0, n1, 0, n2};
      StepOptions d;
      d.mode = Mode::Direct;
      d.cross_check = true;
      const StepOutcome o = step_minimize(s, p, d);
      ASSERT_TRUE(o.modes_agree);
      EXPECT_TRUE(*o.modes_agree) << to_string(alpha) << " " << n1 << "x" << n2 << " eps " << to_string(eps);
      EXPECT_EQ(o.value, direct_value(s, o.move, p));
    }
  }
}

TEST(StepMinimize, ModesAgreeOnLargerBoxes) {
  std::mt19937 rng(17);
  const std::vector<std::pair<Rational, Rational>> ag = {
      {Rational(1, 8), 1}, {Rational(1, 4), 1}, {1, 1}, {Rational(1, 2), 1}, {Rational(3, 4), 1}, {Rational(5, 4), 1}};
  for (const auto& [alpha, gamma] : ag) {
    for (int trial = 0; trial < 4; ++trial) {
      const std::int64_t n1 = 2 * std::uniform_int_distribution<int>(10, 32)(rng);
      const std::int64_t n2 = 2 * std::uniform_int_distribution<int>(10, 32)(rng);
      const Rational eps(1, std::uniform_int_distribution<int>(30, 300)(rng));
      const Params p = P(alpha, std::uniform_int_distribution<int>(1, 3)(rng), gamma, eps);
      RectState s;
      s.rect = IntRect{0, n1, 0, n2};
      StepOptions o;
      o.cross_check = true;
      const StepOutcome out = step_minimize(s, p, o);
      ASSERT_TRUE(out.modes_agree);
      EXPECT_TRUE(*out.modes_agree) << to_string(alpha) << " beta " << to_string(p.beta) << " " << n1 << "x" << n2
                                    << " eps " << to_string(eps) << " " << to_json(out).dump();
    }
  }
}

TEST(StepMinimize, ModesAgreeAlongEvolutionsWithIslands) {
  const std::vector<std::tuple<Rational, Rational, Rational>> cases = {
      {Rational(1, 8), Rational(1, 5), Rational(3, 10)},
      {1, Rational(1, 5), Rational(7, 25)},
      {Rational(3, 4), Rational(6, 25), Rational(6, 25)},
      {Rational(1, 4), Rational(9, 50), Rational(1, 5)},
      {Rational(1, 2), Rational(1, 5), Rational(13, 50)},
  };
  for (const auto& [alpha, L1, L2] : cases) {
    const Params p = P(alpha, 1, 1, Rational(1, 50));
    EvolveOptions o;
    o.step.mode = Mode::Direct;
    o.step.cross_check = true;
    const Evolution ev = evolve(L1, L2, p, 30, o);
    ASSERT_FALSE(ev.steps.empty());
    for (const auto& s : ev.steps) {
      ASSERT_TRUE(s.outcome.modes_agree);
      EXPECT_TRUE(*s.outcome.modes_agree) << to_string(alpha) << " step " << s.step;
    }
  }
}

TEST(StepMinimize, ShrinkingSquareFollowsPrediction) {
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 1000));
  const StepOutcome o = step_minimize(square_state(400), p);
  EXPECT_EQ(o.move, (Move{1, 1, false, 0}));
  EXPECT_TRUE(o.agree);
  EXPECT_TRUE(o.localized);
  EXPECT_FALSE(o.pinned);
  EXPECT_EQ(o.ties.size(), 1u);
}

TEST(StepMinimize, PinnedAboveCriticalLength) {
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 100));
  const StepOutcome o = step_minimize(square_state(80), p);
  EXPECT_TRUE(o.pinned);
  EXPECT_EQ(o.move, (Move{0, 0, false, 0}));
  EXPECT_TRUE(o.agree);
}

TEST(StepMinimize, ShortSideAtCriticalLengthStaysPut) {
  // eps = 1/1100 resolves 8/11 as exactly 800 cells.
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 1100));
  RectState s;
  s.rect = IntRect{0, 1100, 0, 800};
  const StepOutcome o = step_minimize(s, p);
  EXPECT_EQ(o.move.h, 0);
  EXPECT_EQ(o.move.k, 0);
  EXPECT_TRUE(o.agree);
}

TEST(StepMinimize, WorkersAndWindowDoNotChangeTheResult) {
  const Params p = P(1, 1, 1, Rational(1, 500));
  RectState s;
  s.rect = IntRect{0, 120, 0, 160};
  const StepOutcome base = step_minimize(s, p);
  StepOptions w;
  w.workers = 3;
  EXPECT_EQ(step_minimize(s, p, w).move, base.move);
  StepOptions win;
  win.window_center = std::pair{base.move.h, base.move.k};
  win.window_radius = 2;
  const StepOutcome ow = step_minimize(s, p, win);
  EXPECT_EQ(ow.move, base.move);
  EXPECT_EQ(ow.value, base.value);
}

TEST(StepMinimize, TieAtFourAlphaGammaTwo) {
  // L = 2/3 = lambda+ on the vertical side, the horizontal side longer.
  const Params p = P(Rational(1, 2), 1, 1, Rational(1, 300));
  RectState s;
  s.rect = IntRect{0, 300, 0, 200};
  const StepOutcome o = step_minimize(s, p);
  ASSERT_EQ(o.ties.size(), 2u);
  EXPECT_EQ(o.ties[0], (Move{0, 0, false, 0}));
  EXPECT_EQ(o.ties[1], (Move{1, 0, false, 0}));
  EXPECT_TRUE(o.agree);
}

TEST(StepMinimize, RejectsEmptyState) {
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 100));
  EXPECT_THROW(step_minimize(RectState{}, p), std::invalid_argument);
}

TEST(ApplyMove, MaterializedStateEqualsCandidate) {
  for (const Rational& alpha : {Rational(1, 8), Rational(1)}) {
    const Params p = P(alpha, 1, 1, Rational(1, 50));
    RectState s;
    s.rect = IntRect{0, 24, 0, 16};
    for (const Move& m : {Move{1, 2, false, 0}, Move{0, 0, false, 0}, Move{3, 1, false, 0}}) {
      const RectState next = apply_move(s, m, p);
      EXPECT_EQ(next.materialize(), build_candidate(s, m, p));
      const auto d = lattice::decompose(next.materialize());
      ASSERT_TRUE(std::holds_alternative<RectState>(d));
      EXPECT_EQ(std::get<RectState>(d), next);
    }
  }
}

TEST(ApplyMove, SingleSiteCoreBecomesAnIsland) {
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 50));
  RectState s;
  s.rect = IntRect{0, 8, 0, 8};
  const RectState next = apply_move(s, Move{2, 2, false, 0}, p);
  EXPECT_TRUE(next.rect.empty());
  EXPECT_TRUE(next.islands.contains(LatticePoint{4, 4}));
}

TEST(Evolve, PinnedDatumStopsImmediately) {
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 100));
  const Evolution ev = evolve(Rational(4, 5), Rational(9, 10), p, 10);
  EXPECT_TRUE(ev.pinned);
  ASSERT_EQ(ev.steps.size(), 1u);
  EXPECT_EQ(ev.steps[0].state.rect, ev.initial.rect);
}

TEST(Evolve, ShrinkingSquareEnergyDecreasesUntilVanishing) {
  for (const Rational& alpha : {Rational(1, 8), Rational(1)}) {
    const Params p = P(alpha, 1, 1, Rational(1, 100));
    const Evolution ev = evolve(Rational(2, 5), Rational(2, 5), p, 200);
    EXPECT_TRUE(ev.vanished);
    EXPECT_TRUE(ev.all_localized);
    Rational last = ev.initial_energy;
    for (const auto& s : ev.steps) {
      EXPECT_LE(s.energy, last);
      last = s.energy;
      if (!s.state.rect.empty()) {
        EXPECT_EQ(s.state.rect.width(), s.state.rect.height());
      }
    }
    EXPECT_TRUE(ev.steps.back().state.rect.empty());
  }
}

TEST(Evolve, DissolvedIslandsStayDeep) {
  const Params p = P(1, 1, 1, Rational(1, 200));
  const std::int64_t N = 2;
  const Evolution ev = evolve(Rational(1, 5), Rational(1, 4), p, 40);
  RectState prev = ev.initial;
  for (const auto& s : ev.steps) {
    for (const auto& q : s.state.islands) {
      ASSERT_FALSE(prev.rect.empty());
      const IntRect& r = prev.rect;
      const std::int64_t depth = std::min({q.i1 - r.lo1, r.hi1 - q.i1, q.i2 - r.lo2, r.hi2 - q.i2});
      EXPECT_GE(depth, 2 * N) << "island outside C(N,N)";
    }
    EXPECT_TRUE(s.state.islands.empty() || s.outcome.vanished);
    prev = s.state;
  }
}

TEST(Evolve, StrictCondoRejectsUnresolvedSide) {
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 100));
  EvolveOptions o;
  o.condo = CondoMode::Strict;
  EXPECT_THROW(evolve(Rational(41, 100), Rational(1, 2), p, 3, o), ConfigError);
  EXPECT_NO_THROW(evolve(Rational(2, 5), Rational(41, 100), p, 1, o));
}

TEST(Evolve, TraceFormats) {
  const Params p = P(Rational(1, 8), 1, 1, Rational(1, 100));
  const Evolution ev = evolve(Rational(2, 5), Rational(2, 5), p, 2);
  const std::string csv = trace_csv(ev);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,h,k,L1_cells,L2_cells,islands_count,energy_num,energy_den,pinned,tie_count");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 1 + static_cast<long>(ev.steps.size()));
  const auto j = trace_json(ev, p);
  EXPECT_EQ(j.at("steps").size(), ev.steps.size());
  EXPECT_EQ(trace_json(ev, p).dump(), j.dump());
}

}  // namespace
}  // namespace mushy::flow

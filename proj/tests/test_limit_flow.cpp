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

#include <cmath>

#include "mushy/limit_flow.hpp"
#include "mushy/structured_flow.hpp"

namespace mushy::limit {
namespace {

Params P(Rational alpha, Rational beta, Rational gamma) {
  return Params::with_gamma(std::move(alpha), std::move(beta), Rational(1, 1000), std::move(gamma));
}

TEST(Rhs, KnownValues) {
  const Params p = P(Rational(1, 8), 1, 1);
  EXPECT_EQ(rhs(0.4, p), -4.0);
  EXPECT_EQ(rhs(1.0, p), 0.0);
  EXPECT_EQ(rhs(1e6, p), 0.0);
  EXPECT_EQ(rhs(0.3, p), -8.0);
  EXPECT_THROW(rhs(0.0, p), std::invalid_argument);
  EXPECT_THROW(rhs(-1.0, p), std::invalid_argument);
}

TEST(Rhs, PinningThresholds) {
  EXPECT_DOUBLE_EQ(pinning_threshold(P(Rational(1, 8), 1, 1)), 8.0 / 11.0);
  EXPECT_DOUBLE_EQ(pinning_threshold(P(1, 1, 1)), 2.0 / 3.0);
  // The threshold agrees with the discrete lambda_c and lambda+.
  const Params r = P(Rational(1, 8), 1, 1);
  EXPECT_DOUBLE_EQ(pinning_threshold(r), to_double(*flow::thresholds(r).lambda_c));
  const Params d = P(1, 2, 1);
  EXPECT_DOUBLE_EQ(pinning_threshold(d), to_double(*flow::thresholds(d).lambda_plus));
  // Just below the threshold the side moves; above it it does not.
  EXPECT_LT(rhs(8.0 / 11.0 - 1e-9, r), 0.0);
  EXPECT_EQ(rhs(8.0 / 11.0 + 1e-9, r), 0.0);
}

TEST(Rhs, SlowerCountAtJumps) {
  // Floor argument 2/(3L) + 1/12 equals 2 exactly at L = 8/23.
  const Params p = P(Rational(1, 8), 1, 1);
  const double jump = 8.0 / 23.0;
  EXPECT_EQ(rhs(jump * (1 + 1e-12), p), -4.0);
  EXPECT_EQ(rhs(jump * (1 - 1e-12), p), -8.0);
  EXPECT_LE(std::abs(rhs(jump, p)), 8.0);
}

TEST(Rhs, MatchesDiscreteDisplacementTimesFourOverGamma) {
  for (const auto& [alpha, gamma] : {std::pair<Rational, Rational>{Rational(1, 8), 1}, {1, 1}, {Rational(1, 16), 2}}) {
    const Params p = P(alpha, 1, gamma);
    for (int i = 7; i <= 200; i += 3) {
      const Rational l(i, 200);
      double expect = 4.0 * static_cast<double>(flow::predict_displacement(l, p)) / to_double(gamma);
      EXPECT_DOUBLE_EQ(-rhs(to_double(l), p), expect) << mushy::to_string(l);
    }
  }
}

TEST(Rhs, CurvatureIdentityHoldsExactly) {
  for (const Rational& alpha : {Rational(1, 8), Rational(1)}) {
    const Params p = P(alpha, 1, 1);
    for (double L = 0.01; L < 2.0; L += 0.0137) {
      EXPECT_EQ(2.0 * curvature_velocity(2.0 / L, p), std::abs(rhs(L, p)));
    }
    EXPECT_EQ(curvature_velocity(0.0, p), 0.0);
  }
  EXPECT_EQ(curvature_velocity(5.0, P(Rational(1, 8), 1, 1)), 2.0);
  EXPECT_THROW(curvature_velocity(-1.0, P(1, 1, 1)), std::invalid_argument);
}

TEST(Rhs, RetainLawNeverUsesTheDissolveBranchBelowThreshold) {
  for (const Rational& alpha : {Rational(1, 8), Rational(1, 5), Rational(1, 32)}) {
    const Params p = P(alpha, 1, 1);
    const double lc = pinning_threshold(p);
    for (double L = 0.01; L <= lc; L += 0.001) {
      EXPECT_EQ(rhs(L, p, Regime::WeakRetain), rhs(L, p, Regime::WeakDissolve)) << L;
    }
  }
}

TEST(Rhs, BothLawsCoincideAtFourAlphaGammaOne) {
  const Params p = P(Rational(1, 4), 1, 1);
  for (double L = 0.005; L <= 2.0; L += 0.0011) {
    EXPECT_EQ(rhs(L, p, Regime::WeakRetain), rhs(L, p, Regime::WeakDissolve)) << L;
  }
}

TEST(InfiniteGamma, BranchesAndCrossover) {
  const Params p = P(1, 1, 1);
  EXPECT_DOUBLE_EQ(rhs_infinite_gamma(0.25, p), -8.0);
  EXPECT_DOUBLE_EQ(crystalline_reference(0.25, p), -8.0);
  EXPECT_DOUBLE_EQ(crystalline_reference(1.0, p), -2.0);
  EXPECT_DOUBLE_EQ(rhs_infinite_gamma(0.2, p), -32.0 / 3.0);
  const Params tiny = P(Rational(1, 1000000), 1, 1);
  EXPECT_NEAR(rhs_infinite_gamma(0.5, tiny), -16.0 / 3.0, 1e-5);
  for (double L = 0.02; L < 3.0; L += 0.01) {
    EXPECT_GE(std::abs(rhs_infinite_gamma(L, p)), std::abs(crystalline_reference(L, p)));
  }
}

TEST(InfiniteGamma, FiniteGammaApproachesTheLimitLaw) {
  for (const Rational& gamma : {Rational(100), Rational(1000), Rational(10000)}) {
    for (const Rational& alpha : {Rational(1), Rational(1, 4)}) {
      const Params p = P(alpha, 1, gamma);
      double worst = 0;
      for (double L = 0.05; L <= 1.0; L += 0.001) {
        worst = std::max(worst, std::abs(rhs(L, p) - rhs_infinite_gamma(L, p)));
      }
      EXPECT_LE(worst, 8.0 / to_double(gamma));
    }
  }
}

TEST(Integrate, PinnedDatumIsConstant) {
  const Params p = P(Rational(1, 8), 1, 1);
  const LimitTrace tr = integrate({0.9, 1.2}, p, 1.0, 1e-3);
  EXPECT_TRUE(tr.pinned);
  EXPECT_FALSE(tr.vanish_time);
  EXPECT_DOUBLE_EQ(tr.at(0.7).L1, 0.9);
  EXPECT_DOUBLE_EQ(tr.at(0.7).L2, 1.2);
}

TEST(Integrate, ShrinkingSquareFirstRegionAndJump) {
  const Params p = P(Rational(1, 8), 1, 1);
  const double dt = 1e-4;
  const LimitTrace tr = integrate({0.4, 0.4}, p, 0.2, dt);
  EXPECT_NEAR(tr.at(0.005).L1, 0.4 - 4 * 0.005, 1e-12);
  // First jump when L reaches 8/23, then slope -8.
  const double t1 = (0.4 - 8.0 / 23.0) / 4.0;
  ASSERT_FALSE(tr.events.empty());
  EXPECT_EQ(tr.events.front().kind, EventKind::FloorJump);
  EXPECT_NEAR(tr.events.front().t, t1, dt);
  const double t = t1 + 0.002;
  EXPECT_NEAR(tr.at(t).L1, 8.0 / 23.0 - 8 * 0.002, 1e-6);
  EXPECT_NEAR(tr.at(t).L1, tr.at(t).L2, 1e-12);
  ASSERT_TRUE(tr.vanish_time);
  EXPECT_EQ(tr.events.back().kind, EventKind::Vanished);
  EXPECT_EQ(tr.at(*tr.vanish_time + 1e-3).L1, 0.0);
  EXPECT_NEAR(tr.distance_to_event(t1 + 1e-3), 1e-3, dt);
}

TEST(Integrate, MonotoneAndPiecewiseLinear) {
  const Params p = P(1, 1, 1);
  const LimitTrace tr = integrate({0.5, 0.8}, p, 1.0, 1e-4);
  for (std::size_t i = 1; i < tr.states.size(); ++i) {
    EXPECT_LE(tr.states[i].L1, tr.states[i - 1].L1 + 1e-15);
    EXPECT_LE(tr.states[i].L2, tr.states[i - 1].L2 + 1e-15);
    EXPECT_GE(tr.times[i], tr.times[i - 1]);
  }
}

TEST(Integrate, RefinementIsStable) {
  const Params p = P(Rational(1, 8), 1, 1);
  const LimitTrace a = integrate({0.45, 0.6}, p, 0.1, 1e-3);
  const LimitTrace b = integrate({0.45, 0.6}, p, 0.1, 5e-4);
  double worst = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = 0.1 * i / 1000;
    if (a.distance_to_event(t) < 2e-3) continue;
    worst = std::max(worst, std::abs(a.at(t).L1 - b.at(t).L1));
    worst = std::max(worst, std::abs(a.at(t).L2 - b.at(t).L2));
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(Integrate, RejectsBadInput) {
  const Params p = P(1, 1, 1);
  EXPECT_THROW(integrate({0.5, 0.5}, p, 0.0, 1e-3), std::invalid_argument);
  EXPECT_THROW(integrate({0.5, 0.5}, p, 1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(integrate({0.0, 0.5}, p, 1.0, 1e-3), std::invalid_argument);
}

TEST(Integrate, TraceFormats) {
  const Params p = P(Rational(1, 8), 1, 1);
  const LimitTrace tr = integrate({0.4, 0.4}, p, 0.05, 1e-3);
  const std::string csv = trace_csv(tr);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,L1,L2,event");
  const auto j = trace_json(tr);
  EXPECT_EQ(j.at("points").size(), tr.times.size());
  EXPECT_EQ(j.at("events").size(), tr.events.size());
}

}  // namespace
}  // namespace mushy::limit

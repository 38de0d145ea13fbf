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

#include "mushy/structured_flow.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <thread>
#include <tuple>

namespace mushy::flow {
namespace {

using lattice::BondKind;
using lattice::LatticePoint;

Rational R(std::int64_t v) { return make_rational(v); }

Rational ag_of(const Params& p) { return p.alpha * p.gamma; }

bool retains_islands(Regime r) { return r != Regime::WeakDissolve; }

bool odd_integer(const Rational& x) {
  if (!is_integer(x)) return false;
  return mpz_odd_p(x.get_num().get_mpz_t()) != 0;
}

IntRect origin_rect(const RectExtents& ext) { return {0, ext.n1, 0, ext.n2}; }

void check_index(std::int64_t h, std::int64_t k, const RectExtents& ext) {
  if (h < 0 || k < 0 || 4 * h > ext.n1 || 4 * k > ext.n2) {
    throw std::out_of_range("displacement (" + std::to_string(h) + ", " + std::to_string(k) +
                            ") outside the index box");
  }
}

DiscreteSet evens_of_rect(const IntRect& r) {
  std::vector<LatticePoint> out;
  if (r.empty()) return DiscreteSet();
  const std::int64_t a0 = r.lo1 + (r.lo1 % 2 != 0 ? 1 : 0);
  const std::int64_t b0 = r.lo2 + (r.lo2 % 2 != 0 ? 1 : 0);
  for (std::int64_t a = a0; a <= r.hi1; a += 2) {
    for (std::int64_t b = b0; b <= r.hi2; b += 2) out.push_back({a, b});
  }
  return DiscreteSet(std::move(out));
}

// Lattice description of a structured candidate: core rectangle, the even
// sites of another rectangle, and optionally a retained island set.
struct Shape {
  IntRect core;
  IntRect even_rect;
  const DiscreteSet* islands = nullptr;

  bool contains(LatticePoint q) const {
    if (core.contains(q)) return true;
    if (lattice::is_even_site(q) && even_rect.contains(q)) return true;
    return islands != nullptr && islands->contains(q);
  }

  DiscreteSet materialize() const {
    DiscreteSet s = set_union(DiscreteSet::from_rect(core), evens_of_rect(even_rect));
    return islands != nullptr ? set_union(s, *islands) : s;
  }
};

Shape shape_of(const RectState& st, const Move& mv, Regime reg, std::int64_t N) {
  Shape s;
  s.core = mv.vanish ? IntRect::empty_rect() : core_bounds(st.rect, mv.h, mv.k);
  if (retains_islands(reg)) {
    s.even_rect = st.rect;
    s.islands = &st.islands;
  } else {
    s.even_rect = core_bounds(st.rect, N - mv.variant, N - mv.variant);
  }
  return s;
}

std::int64_t n_for(const Params& p, Regime reg) { return reg == Regime::WeakDissolve ? n_alpha_gamma(p.alpha, p.gamma) : 0; }

// Previous state prepared for repeated exact evaluation of candidates that
// are subsets of it.
class DirectContext {
 public:
  DirectContext(const RectState& st, const Params& p)
      : p_(p), prev_(st.materialize()), field_(prev_), c0_(lattice::cut_counts(prev_)) {}

  Rational value(const Shape& s) const {
    std::int64_t strong = 0, weak = 0, dsum = 0;
    for (const auto& q : prev_) {
      if (!s.contains(q)) {
        dsum += field_.distance(q);
        continue;
      }
      for (const auto& n : {LatticePoint{q.i1 + 1, q.i2}, LatticePoint{q.i1 - 1, q.i2}, LatticePoint{q.i1, q.i2 + 1},
                            LatticePoint{q.i1, q.i2 - 1}}) {
        if (s.contains(n)) continue;
        if (lattice::bond_kind(q, n) == BondKind::Strong) {
          ++strong;
        } else {
          ++weak;
        }
      }
    }
    return p_.beta * R(strong - c0_.strong) + p_.eps * p_.alpha * R(weak - c0_.weak) + p_.eps / p_.gamma * R(dsum);
  }

 private:
  const Params& p_;
  DiscreteSet prev_;
  lattice::ChebyshevField field_;
  lattice::CutCounts c0_;
};

// sum over a in A, b in B of min(a, b)
Integer separable_min_sum(std::vector<std::int64_t> A, std::vector<std::int64_t> B) {
  std::sort(B.begin(), B.end());
  std::vector<Integer> prefix(B.size() + 1, 0);
  for (std::size_t i = 0; i < B.size(); ++i) prefix[i + 1] = prefix[i] + Integer(static_cast<long>(B[i]));
  Integer total = 0;
  for (const auto a : A) {
    const auto idx = static_cast<std::size_t>(std::lower_bound(B.begin(), B.end(), a) - B.begin());
    total += prefix[idx] + Integer(static_cast<long>(a)) * Integer(static_cast<long>(B.size() - idx));
  }
  return total;
}

std::vector<std::int64_t> depths(std::int64_t n, std::int64_t lo, std::int64_t hi, bool even_only) {
  std::vector<std::int64_t> out;
  for (std::int64_t x = std::max<std::int64_t>(lo, 0); x <= std::min(hi, n); ++x) {
    if (even_only && x % 2 != 0) continue;
    out.push_back(std::min(x + 1, n - x + 1));
  }
  return out;
}

// Normalized energy of the candidate with an empty core: only the even sites
// of `keep` (rect-relative) survive from the bulky rectangle.
Rational vanish_closed_form(const RectExtents& ext, const IntRect& keep, std::int64_t islands_dropped, const Params& p) {
  const auto all1 = depths(ext.n1, 0, ext.n1, false);
  const auto all2 = depths(ext.n2, 0, ext.n2, false);
  std::vector<std::int64_t> v1, v2;
  if (!keep.empty()) {
    v1 = depths(ext.n1, keep.lo1, keep.hi1, true);
    v2 = depths(ext.n2, keep.lo2, keep.hi2, true);
  }
  const Integer dsum = separable_min_sum(all1, all2) - separable_min_sum(v1, v2) + islands_dropped;
  const std::int64_t kept = static_cast<std::int64_t>(v1.size() * v2.size());
  const std::int64_t perim = ext.n1 + ext.n2;
  return -p.beta * R(perim) + p.eps * p.alpha * R(4 * kept - perim - 4 - 4 * islands_dropped) +
         p.eps / p.gamma * Rational(dsum);
}

struct Entry {
  Move mv;
  Rational value;
};

std::tuple<std::int64_t, std::int64_t, int> tie_key(const Move& m, const RectExtents& ext) {
  if (m.vanish) return {ext.n1 / 4 + 1, ext.n2 / 4 + 1, m.variant};
  return {m.h, m.k, m.variant};
}

void keep_min(std::vector<Entry>& best, Entry e) {
  if (best.empty() || e.value < best.front().value) {
    best.clear();
    best.push_back(std::move(e));
  } else if (e.value == best.front().value) {
    best.push_back(std::move(e));
  }
}

Integer integer_of(__int128 v) {
  const bool neg = v < 0;
  const auto mag = static_cast<unsigned __int128>(neg ? -v : v);
  Integer hi(static_cast<unsigned long>(static_cast<std::uint64_t>(mag >> 64)));
  Integer out = hi << 64;
  out += Integer(static_cast<unsigned long>(static_cast<std::uint64_t>(mag)));
  return neg ? Integer(-out) : out;
}

// Minimum of eval over [a, b] where eval is one polynomial of degree <= 3.
// The values are scaled to integers by the common denominator of four samples
// (forward differences of such a polynomial stay integral) and stepped with
// exact integer finite differences. Returns every minimizing x.
void min_cubic_segment(std::int64_t a, std::int64_t b, const std::function<Rational(std::int64_t)>& eval,
                       std::vector<std::pair<std::int64_t, Rational>>& out) {
  auto slow = [&] {
    for (std::int64_t x = a; x <= b; ++x) out.emplace_back(x, eval(x));
  };
  if (b - a < 4) return slow();
  Rational v[4];
  Integer den = 1;
  for (int i = 0; i < 4; ++i) {
    v[i] = eval(a + i);
    mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), v[i].get_den_mpz_t());
  }
  if (!den.fits_slong_p()) return slow();
  __int128 y[4];
  for (int i = 0; i < 4; ++i) {
    const Integer z = v[i].get_num() * (den / v[i].get_den());
    if (!z.fits_slong_p()) return slow();
    y[i] = z.get_si();
  }
  __int128 cur = y[0], d1 = y[1] - y[0], d2 = y[2] - 2 * y[1] + y[0];
  const __int128 d3 = y[3] - 3 * y[2] + 3 * y[1] - y[0];
  __int128 best = cur;
  std::vector<std::int64_t> at;
  for (std::int64_t x = a; x <= b; ++x) {
    if (x == a || cur < best) {
      best = cur;
      at.assign(1, x);
    } else if (cur == best) {
      at.push_back(x);
    }
    cur += d1;
    d1 += d2;
    d2 += d3;
  }
  Rational value(integer_of(best), den);
  value.canonicalize();
  for (std::int64_t x : at) out.emplace_back(x, Rational(value));
}

}  // namespace

std::int64_t i_floor_even(const Rational& x, const Rational& eps) {
  if (x < 0 || eps <= 0) throw std::invalid_argument("i_floor_even needs x >= 0 and eps > 0");
  const Integer q = floor_of(Rational(x / eps));
  Integer half;
  mpz_fdiv_q_2exp(half.get_mpz_t(), q.get_mpz_t(), 1);
  return to_int64(Integer(half * 2));
}

RectExtents extents_from_lengths(const Rational& L1, const Rational& L2, const Rational& eps) {
  if (L1 <= 0 || L2 <= 0) throw std::invalid_argument("side lengths must be positive");
  RectExtents e;
  e.n1 = i_floor_even(L1, eps);
  e.n2 = i_floor_even(L2, eps);
  e.rho1 = L1 / eps - e.n1;
  e.rho2 = L2 / eps - e.n2;
  e.condo = (L1 <= L2 ? e.rho1 : e.rho2) == 0;
  return e;
}

RectExtents extents_of(const IntRect& r) {
  RectExtents e;
  e.n1 = r.width();
  e.n2 = r.height();
  return e;
}

IntRect core_bounds(const IntRect& r, std::int64_t h, std::int64_t k) {
  if (r.empty()) return r;
  return {r.lo1 + 2 * h, r.hi1 - 2 * h, r.lo2 + 2 * k, r.hi2 - 2 * k};
}

DiscreteSet core_rect(std::int64_t h, std::int64_t k, const RectExtents& ext) {
  check_index(h, k, ext);
  return DiscreteSet::from_rect(core_bounds(origin_rect(ext), h, k));
}

DiscreteSet candidate_weak_retain(std::int64_t h, std::int64_t k, const DiscreteSet& I0, const RectExtents& ext) {
  return set_union(core_rect(h, k, ext), lattice::even_sites(I0));
}

DiscreteSet candidate_weak_dissolve(std::int64_t s, std::int64_t t, const RectExtents& ext, std::int64_t n_ag) {
  return set_union(core_rect(s, t, ext), evens_of_rect(core_bounds(origin_rect(ext), n_ag, n_ag)));
}

std::int64_t n_alpha_gamma(const Rational& alpha, const Rational& gamma) {
  const Rational x = 4 * alpha * gamma;
  if (x < 1) throw RegimeError("N_ag is defined only for 4 alpha gamma >= 1");
  return floor_int(Rational((floor_of(x) + 1) / Rational(2)));
}

Thresholds thresholds(const Params& p) {
  Thresholds t;
  const Rational fag = p.four_alpha_gamma();
  const Rational bg = p.beta * p.gamma;
  t.regime = regime_of(p);
  t.odd_integer_flag = odd_integer(fag);
  if (fag <= 1) t.lambda_c = 4 * bg / (fag + 5);
  if (fag >= 1) {
    const std::int64_t N = n_alpha_gamma(p.alpha, p.gamma);
    t.n_ag = N;
    t.lambda_c_star = 4 * bg / (fag + 5 + 6 * N);
    t.lambda_minus = 2 * bg / (4 * N - 1);
    t.lambda_plus = 2 * bg / 3;
  }
  return t;
}

nlohmann::json to_json(const Thresholds& t) {
  auto opt = [](const std::optional<Rational>& v) { return v ? to_json(*v) : nlohmann::json(nullptr); };
  return {{"lambda_c", opt(t.lambda_c)},
          {"lambda_c_star", opt(t.lambda_c_star)},
          {"lambda_minus", opt(t.lambda_minus)},
          {"lambda_plus", opt(t.lambda_plus)},
          {"n_ag", t.n_ag ? nlohmann::json(*t.n_ag) : nlohmann::json(nullptr)},
          {"regime", to_string(t.regime)},
          {"odd_integer_flag", t.odd_integer_flag}};
}

Centers closed_form_centers(const Rational& l, const Params& p) {
  if (l <= 0) throw std::invalid_argument("length must be positive");
  const Rational bg = p.beta * p.gamma;
  return {(2 * bg - (2 * ag_of(p) + 1) * l) / (3 * l), (2 * bg - l) / (4 * l)};
}

namespace {

Rational floor_arg_a(const Rational& l, const Params& p) {
  return 2 * p.beta * p.gamma / (3 * l) - 2 * ag_of(p) / 3 + Rational(1, 6);
}

Rational floor_arg_b(const Rational& l, const Params& p) { return p.beta * p.gamma / (2 * l) + Rational(1, 4); }

std::int64_t clamp_floor(const Rational& x) { return std::max<std::int64_t>(0, floor_int(x)); }

}  // namespace

std::int64_t predict_displacement(const Rational& l, const Params& p) {
  if (l <= 0) throw std::invalid_argument("length must be positive");
  const Thresholds th = thresholds(p);
  if (th.regime != Regime::WeakDissolve) {
    if (l > *th.lambda_c) return 0;
    return clamp_floor(floor_arg_a(l, p));
  }
  if (th.odd_integer_flag) throw NonUniquePrediction("4 alpha gamma is an odd integer; the minimizer is not unique");
  if (l > *th.lambda_plus) return 0;
  if (l > *th.lambda_minus) return clamp_floor(floor_arg_b(l, p));
  if (l > *th.lambda_c_star) return *th.n_ag;
  return clamp_floor(floor_arg_a(l, p));
}

std::vector<std::pair<std::int64_t, std::int64_t>> predict_pair(const Rational& L, const Rational& Lp, const Params& p) {
  const std::int64_t h = predict_displacement(L, p);
  const std::int64_t k = predict_displacement(Lp, p);
  const Thresholds th = thresholds(p);
  const Rational& lo = L < Lp ? L : Lp;
  const Rational& hi = L < Lp ? Lp : L;
  // At the pinning threshold a lone moving side stays put unless the other
  // side moves too.
  auto pin_short = [&](std::int64_t v) -> std::pair<std::int64_t, std::int64_t> {
    return L < Lp ? std::pair{v, k} : std::pair{h, v};
  };
  if (th.regime != Regime::WeakDissolve) {
    if (lo == *th.lambda_c && lo < hi) return {pin_short(0)};
    return {{h, k}};
  }
  if (lo == *th.lambda_plus && lo < hi) {
    const Rational fag = p.four_alpha_gamma();
    if (fag < 2) return {pin_short(0)};
    if (fag == 2) return {pin_short(0), pin_short(1)};
  }
  return {{h, k}};
}

Rational pi_poly(std::int64_t x, const Params& p) { return R(3 * x * x) + 2 * (2 * ag_of(p) + 1) * x; }

Rational P_poly(const Rational& l, std::int64_t x, const Params& p) {
  return l / p.gamma * pi_poly(x, p) - 4 * p.beta * x;
}

Rational R_poly(std::int64_t h, std::int64_t k, const Params& p) {
  if (h < k) std::swap(h, k);
  const Rational c = 2 * ag_of(p) + 1;
  return R(2 * h * h) + 2 * c * h + R(2 * k * k) + 2 * c * k - 8 * c * h * k - R(12 * h * k * k) - R(4 * h * h * h);
}

Rational p_poly(std::int64_t x) { return R(2 * x * (2 * x + 1)); }

Rational Q_poly(const Rational& l, std::int64_t x, const Params& p) {
  return l / p.gamma * p_poly(x) - 4 * p.beta * x;
}

Rational r_poly(std::int64_t s, std::int64_t t, const Params& p) {
  if (s < t) std::swap(s, t);
  return Rational(2, 3) * (1 + 4 * s) * p_poly(s) + R(1 - 4 * s) * (p_poly(s) + p_poly(t)) - 4 * ag_of(p) * (s + t);
}

Rational R_ag_poly(std::int64_t h, std::int64_t k, std::int64_t N, const Params& p) {
  return R_poly(h, k, p) + R(4 * N * (1 - 6 * N) * (h + k)) - R(24 * N * h * k) - R(12 * N * (h * h + k * k)) -
         8 * N * (2 * ag_of(p) + 1) * (h + k);
}

Rational pi_ag_poly(std::int64_t k, std::int64_t N, const Params& p) {
  return R(3 * k * k) + 2 * (3 * N + 2 * ag_of(p) + 1) * k + p_poly(N);
}

Rational r_ag_poly(std::int64_t h, std::int64_t t, std::int64_t N, const Params& p) {
  return r_poly(N, t, p) + R(8 * h * (N - t) * (2 * N + 2 * t + 1)) + R_ag_poly(h, 0, N, p);
}

Rational overlap_poly(std::int64_t x, std::int64_t m) {
  const std::int64_t e = x - (m + 2) / 4;
  if (e <= 0) return 0;
  if (m % 4 == 0) return R(2 * e * e * (2 * e - 1));
  return R(2 * e * (2 * e * e + 2 * e + 1));
}

Poly poly_from_name(const std::string& name) {
  static const std::vector<std::pair<std::string, Poly>> names = {
      {"pi", Poly::Pi},  {"P", Poly::P},          {"R", Poly::R},        {"p", Poly::SmallP},         {"Q", Poly::Q},
      {"r", Poly::SmallR}, {"R_ag", Poly::RAg}, {"pi_ag", Poly::PiAg}, {"r_ag", Poly::SmallRAg},
      {"o", Poly::Overlap}};
  for (const auto& [n, v] : names) {
    if (n == name) return v;
  }
  throw std::invalid_argument("unknown polynomial '" + name + "'");
}

Rational poly_eval(Poly name, const std::vector<Rational>& args, const Params& p) {
  auto need = [&](std::size_t n) {
    if (args.size() != n) throw std::invalid_argument("wrong number of polynomial arguments");
  };
  auto idx = [&](std::size_t i) {
    if (!is_integer(args[i])) throw std::invalid_argument("polynomial index arguments must be integers");
    return floor_int(args[i]);
  };
  std::int64_t N = 0;
  if (name == Poly::RAg || name == Poly::PiAg || name == Poly::SmallRAg) N = n_alpha_gamma(p.alpha, p.gamma);
  switch (name) {
    case Poly::Pi:
      need(1);
      return pi_poly(idx(0), p);
    case Poly::P:
      need(2);
      return P_poly(args[0], idx(1), p);
    case Poly::R:
      need(2);
      return R_poly(idx(0), idx(1), p);
    case Poly::SmallP:
      need(1);
      return p_poly(idx(0));
    case Poly::Q:
      need(2);
      return Q_poly(args[0], idx(1), p);
    case Poly::SmallR:
      need(2);
      return r_poly(idx(0), idx(1), p);
    case Poly::RAg:
      need(2);
      return R_ag_poly(idx(0), idx(1), N, p);
    case Poly::PiAg:
      need(1);
      return pi_ag_poly(idx(0), N, p);
    case Poly::SmallRAg:
      need(2);
      return r_ag_poly(idx(0), idx(1), N, p);
    case Poly::Overlap:
      need(2);
      return overlap_poly(idx(0), idx(1));
  }
  throw std::invalid_argument("unknown polynomial");
}

Rational f_eps(std::int64_t h, std::int64_t k, const Rational& L, const Rational& Lp, const RectExtents& ext,
               const Params& p) {
  const Rational eg = p.eps / p.gamma;
  Rational v = P_poly(L, h, p) + P_poly(Lp, k, p) + eg * R_poly(h, k, p) - eg * ext.rho1 * pi_poly(k, p);
  if (ext.rho2 != 0) v -= eg * ext.rho2 * pi_poly(h, p);
  return v + eg * (overlap_poly(h, ext.n2) + overlap_poly(k, ext.n1));
}

Rational g_eps(std::int64_t s, std::int64_t t, const Rational& L, const Rational& Lp, const RectExtents& ext,
               const Params& p) {
  const std::int64_t N = n_alpha_gamma(p.alpha, p.gamma);
  const Rational eg = p.eps / p.gamma;
  // Side contribution for a displacement x of an edge of length l.
  auto side = [&](const Rational& l, std::int64_t x) -> Rational {
    if (x <= N) return Q_poly(l, x, p);
    return P_poly(l, x - N, p) + 6 * l * N / p.gamma * (x - N) + Q_poly(l, N, p);
  };
  Rational v = side(L, s) + side(Lp, t);
  if (s <= N && t <= N) {
    v += eg * r_poly(s, t, p);
  } else if (s >= N && t >= N) {
    v += eg * (r_poly(N, N, p) + R_ag_poly(s - N, t - N, N, p));
  } else if (s >= N) {
    v += eg * r_ag_poly(s - N, t, N, p);
  } else {
    v += eg * r_ag_poly(t - N, s, N, p);
  }
  auto corr = [&](std::int64_t x, const Rational& rho) -> Rational {
    if (rho == 0) return 0;
    return rho * (x <= N ? p_poly(x) : pi_ag_poly(x - N, N, p));
  };
  v += eg * (overlap_poly(s, ext.n2) + overlap_poly(t, ext.n1));
  return v - eg * (corr(t, ext.rho1) + corr(s, ext.rho2));
}

DiscreteSet build_candidate(const RectState& state, const Move& mv, const Params& p) {
  const Regime reg = regime_of(p);
  return shape_of(state, mv, reg, n_for(p, reg)).materialize();
}

RectState apply_move(const RectState& state, const Move& mv, const Params& p) {
  const Regime reg = regime_of(p);
  const Shape s = shape_of(state, mv, reg, n_for(p, reg));
  RectState next;
  next.rect = s.core;
  // A one-site rectangle is an even site, i.e. an island.
  if (!next.rect.empty() && next.rect.site_count() == 1) next.rect = IntRect::empty_rect();
  next.islands = set_difference(s.materialize(), DiscreteSet::from_rect(next.rect));
  return next;
}

Rational direct_value(const RectState& state, const Move& mv, const Params& p) {
  const Regime reg = regime_of(p);
  const DirectContext ctx(state, p);
  return ctx.value(shape_of(state, mv, reg, n_for(p, reg)));
}

StepOutcome step_minimize(const RectState& state, const Params& p, const StepOptions& opt) {
  return step_minimize(state, extents_of(state.rect), p, opt);
}

StepOutcome step_minimize(const RectState& state, const RectExtents& ext, const Params& p, const StepOptions& opt) {
  if (state.rect.empty()) throw std::invalid_argument("step_minimize needs a nonempty rectangle");
  if (ext.n1 != state.rect.width() || ext.n2 != state.rect.height()) {
    throw std::invalid_argument("extents do not match the rectangle");
  }
  const Regime reg = regime_of(p);
  const bool dissolve = reg == Regime::WeakDissolve;
  const std::int64_t N = n_for(p, reg);
  const bool odd = dissolve && odd_integer(p.four_alpha_gamma());
  // The C(N-1, N-1) variant differs from the base candidate only if that
  // rectangle is nonempty.
  const bool has_variant = odd && 4 * (N - 1) <= std::min(ext.n1, ext.n2);
  const Rational L = ext.L2(p.eps);
  const Rational Lp = ext.L1(p.eps);
  const auto islands = static_cast<std::int64_t>(state.islands.size());
  const Rational island_offset = dissolve ? islands * (p.eps / p.gamma) * (1 - p.four_alpha_gamma()) : Rational(0);

  std::int64_t hmax = ext.n1 / 4, kmax = ext.n2 / 4;
  std::int64_t hmin = 0, kmin = 0;
  if (opt.window_center) {
    hmin = std::max<std::int64_t>(0, opt.window_center->first - opt.window_radius);
    kmin = std::max<std::int64_t>(0, opt.window_center->second - opt.window_radius);
    hmax = std::min(hmax, opt.window_center->first + opt.window_radius);
    kmax = std::min(kmax, opt.window_center->second + opt.window_radius);
  }

  // The dissolve closed forms count the even sites of C(N, N); rectangles too
  // thin to contain it are evaluated on the lattice, which is cheap for them.
  const bool direct = opt.mode == Mode::Direct || (dissolve && std::min(ext.n1, ext.n2) < 4 * N);
  std::optional<DirectContext> ctx;
  if (direct) ctx.emplace(state, p);

  auto evaluate = [&](const Move& mv) -> Rational {
    if (direct) return ctx->value(shape_of(state, mv, reg, N));
    if (mv.vanish) {
      const IntRect keep = dissolve ? core_bounds(origin_rect(ext), N - mv.variant, N - mv.variant) : origin_rect(ext);
      return vanish_closed_form(ext, keep, dissolve ? islands : 0, p);
    }
    // The variant only adds isolated sites at distance exactly 4ag, which is
    // energy neutral.
    return (dissolve ? g_eps(mv.h, mv.k, L, Lp, ext, p) : f_eps(mv.h, mv.k, L, Lp, ext, p)) + island_offset;
  };

  // Along a row the closed forms are cubic in k between the breakpoints N,
  // N + 1 (dissolve branches), the onset of the overlap term and k = h (the
  // symmetric polynomials sort their arguments).
  std::vector<std::int64_t> cuts{kmin, kmax + 1, (ext.n1 + 2) / 4 + 1};
  if (dissolve) {
    cuts.push_back(N);
    cuts.push_back(N + 1);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto scan_rows = [&](int worker, int nworkers) {
    std::vector<Entry> best;
    std::vector<std::pair<std::int64_t, Rational>> row;
    for (std::int64_t h = hmin + worker; h <= hmax; h += nworkers) {
      if (direct) {
        for (std::int64_t k = kmin; k <= kmax; ++k) {
          keep_min(best, {Move{h, k, false, 0}, evaluate(Move{h, k, false, 0})});
          if (has_variant && std::max(h, k) >= N) keep_min(best, {Move{h, k, false, 1}, evaluate(Move{h, k, false, 1})});
        }
        continue;
      }
      row.clear();
      std::vector<std::int64_t> rc = cuts;
      rc.push_back(h);
      rc.push_back(h + 1);
      std::sort(rc.begin(), rc.end());
      rc.erase(std::unique(rc.begin(), rc.end()), rc.end());
      const auto eval = [&](std::int64_t k) { return evaluate(Move{h, k, false, 0}); };
      for (std::size_t c = 0; c + 1 < rc.size(); ++c) {
        const std::int64_t a = std::max(rc[c], kmin), b = std::min(rc[c + 1] - 1, kmax);
        if (a <= b) min_cubic_segment(a, b, eval, row);
      }
      for (auto& [k, v] : row) {
        if (has_variant && std::max(h, k) >= N) keep_min(best, {Move{h, k, false, 1}, v});
        keep_min(best, {Move{h, k, false, 0}, std::move(v)});
      }
    }
    return best;
  };

  const int nworkers = std::max(1, opt.workers);
  std::vector<std::vector<Entry>> parts(static_cast<std::size_t>(nworkers));
  if (nworkers == 1) {
    parts[0] = scan_rows(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nworkers; ++w) {
      pool.emplace_back([&, w] { parts[static_cast<std::size_t>(w)] = scan_rows(w, nworkers); });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<Entry> best;
  for (auto& part : parts) {
    for (auto& e : part) keep_min(best, std::move(e));
  }
  keep_min(best, {Move{0, 0, true, 0}, evaluate(Move{0, 0, true, 0})});
  if (has_variant) keep_min(best, {Move{0, 0, true, 1}, evaluate(Move{0, 0, true, 1})});
  std::sort(best.begin(), best.end(),
            [&](const Entry& a, const Entry& b) { return tie_key(a.mv, ext) < tie_key(b.mv, ext); });

  StepOutcome out;
  out.move = best.front().mv;
  out.value = best.front().value;
  for (const auto& e : best) out.ties.push_back(e.mv);
  out.vanished = out.move.vanish;
  out.pinned = !out.vanished && out.move.h == 0 && out.move.k == 0;
  out.boundary_regime = reg == Regime::Boundary;

  if (L > 0 && Lp > 0 && !odd) {
    const auto pred = predict_pair(L, Lp, p);
    out.predicted = pred.front();
    out.agree = !out.vanished && std::any_of(pred.begin(), pred.end(), [&](const auto& hk) {
      return hk.first == out.move.h && hk.second == out.move.k;
    });
  }

  const Rational lmin = std::min(L, Lp);
  if (lmin > 0) {
    const Centers c = closed_form_centers(lmin, p);
    Integer xbar = std::max({ceil_of(c.m), ceil_of(c.mu), Integer(static_cast<long>(N)), Integer(0)});
    xbar += 2;
    if (out.vanished) {
      out.localized = Integer(static_cast<long>(std::min(ext.n1, ext.n2) / 4)) <= xbar;
    } else {
      out.localized = Integer(static_cast<long>(std::max(out.move.h, out.move.k))) <= xbar;
    }
  }

  if (opt.cross_check) {
    StepOptions other = opt;
    other.cross_check = false;
    other.mode = opt.mode == Mode::Direct ? Mode::ClosedForm : Mode::Direct;
    const StepOutcome o = step_minimize(state, ext, p, other);
    out.modes_agree = o.move == out.move && o.value == out.value;
  }
  return out;
}

Rational rect_perimeter_energy(const RectState& s, const Params& p) {
  Rational e = 4 * p.alpha * p.eps * p.eps * static_cast<long>(s.islands.size());
  if (!s.rect.empty()) {
    const std::int64_t per = s.rect.width() + s.rect.height();
    e += p.eps * p.beta * per + p.eps * p.eps * p.alpha * (per + 4);
  }
  return e;
}

Evolution evolve(const Rational& L1, const Rational& L2, const Params& p, int max_steps, const EvolveOptions& opt) {
  Evolution ev;
  ev.initial_extents = extents_from_lengths(L1, L2, p.eps);
  if (opt.condo == CondoMode::Strict && !ev.initial_extents.condo) {
    throw ConfigError("eps does not resolve the shorter side exactly (strict condo mode)");
  }
  ev.initial.rect = origin_rect(ev.initial_extents);
  ev.initial_energy = rect_perimeter_energy(ev.initial, p);
  RectState state = ev.initial;
  for (int step = 1; step <= max_steps; ++step) {
    const RectExtents ext = step == 1 ? ev.initial_extents : extents_of(state.rect);
    StepOutcome out = step_minimize(state, ext, p, opt.step);
    state = apply_move(state, out.move, p);
    if (state.rect.empty() && !out.vanished) {
      out.vanished = true;
      out.pinned = false;
    }
    // The bulk always leaves the prediction's range once its side is O(sqrt(eps));
    // that final step is reported, not counted against the guard.
    if (out.vanished) {
      ev.early_vanish = !out.localized;
    } else {
      ev.all_localized = ev.all_localized && out.localized;
    }
    if (out.predicted && !out.vanished && out.ties.size() == 1) {
      const std::int64_t room = std::min(ext.n1, ext.n2) / 4;
      if (out.predicted->first < room && out.predicted->second < room) ev.all_agree = ev.all_agree && out.agree;
    }
    const bool vanished = out.vanished;
    const bool pinned = out.pinned;
    ev.steps.push_back({step, state, std::move(out), rect_perimeter_energy(state, p)});
    if (vanished) {
      ev.vanished = true;
      break;
    }
    if (pinned) {
      ev.pinned = true;
      break;
    }
  }
  return ev;
}

namespace {

nlohmann::json move_json(const Move& m) {
  return {{"h", m.h}, {"k", m.k}, {"vanish", m.vanish}, {"variant", m.variant}};
}

nlohmann::json rect_json(const IntRect& r) {
  if (r.empty()) return nullptr;
  return {r.lo1, r.hi1, r.lo2, r.hi2};
}

}  // namespace

nlohmann::json to_json(const StepOutcome& o) {
  nlohmann::json ties = nlohmann::json::array();
  for (const auto& t : o.ties) ties.push_back(move_json(t));
  nlohmann::json j = {{"move", move_json(o.move)}, {"value", to_json(o.value)}, {"ties", ties},
                      {"pinned", o.pinned},         {"vanished", o.vanished},     {"agree", o.agree},
                      {"localized", o.localized},   {"boundary_regime", o.boundary_regime}};
  j["predicted"] = o.predicted ? nlohmann::json{o.predicted->first, o.predicted->second} : nlohmann::json(nullptr);
  j["modes_agree"] = o.modes_agree ? nlohmann::json(*o.modes_agree) : nlohmann::json(nullptr);
  return j;
}

std::string trace_csv(const Evolution& ev) {
  std::ostringstream os;
  os << "step,h,k,L1_cells,L2_cells,islands_count,energy_num,energy_den,pinned,tie_count\n";
  auto row = [&](int step, std::int64_t h, std::int64_t k, const RectState& s, const Rational& e, bool pinned,
                 std::size_t ties) {
    os << step << ',' << h << ',' << k << ',' << s.rect.width() << ',' << s.rect.height() << ','
       << s.islands.size() << ',' << e.get_num().get_str() << ',' << e.get_den().get_str() << ','
       << (pinned ? 1 : 0) << ',' << ties << '\n';
  };
  row(0, 0, 0, ev.initial, ev.initial_energy, false, 0);
  for (const auto& r : ev.steps) {
    row(r.step, r.outcome.move.h, r.outcome.move.k, r.state, r.energy, r.outcome.pinned, r.outcome.ties.size());
  }
  return os.str();
}

nlohmann::json trace_json(const Evolution& ev, const Params& p) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& r : ev.steps) {
    steps.push_back({{"step", r.step},
                     {"rect", rect_json(r.state.rect)},
                     {"L1_cells", r.state.rect.width()},
                     {"L2_cells", r.state.rect.height()},
                     {"islands_count", r.state.islands.size()},
                     {"energy", to_json(r.energy)},
                     {"outcome", to_json(r.outcome)}});
  }
  const auto& e = ev.initial_extents;
  return {{"params",
           {{"alpha", to_json(p.alpha)},
            {"beta", to_json(p.beta)},
            {"eps", to_json(p.eps)},
            {"tau", to_json(p.tau)},
            {"gamma", to_json(p.gamma)},
            {"regime", to_string(regime_of(p))}}},
          {"initial",
           {{"n1", e.n1},
            {"n2", e.n2},
            {"rho1", to_json(e.rho1)},
            {"rho2", to_json(e.rho2)},
            {"condo", e.condo},
            {"energy", to_json(ev.initial_energy)}}},
          {"steps", steps},
          {"pinned", ev.pinned},
          {"vanished", ev.vanished},
          {"all_localized", ev.all_localized},
          {"early_vanish", ev.early_vanish},
          {"all_agree", ev.all_agree}};
}

}  // namespace mushy::flow

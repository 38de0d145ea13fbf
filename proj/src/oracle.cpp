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

#include "mushy/oracle.hpp"

#include <algorithm>
#include <bit>
#include <set>
#include <thread>

#include "mushy/structured_flow.hpp"

namespace mushy::oracle {
namespace {

using lattice::BondKind;
using lattice::LatticePoint;
using i128 = __int128;

struct Neighbor {
  int j;
  std::int64_t w;  // scaled bond energy
  bool strong;
};

// Energy written as const + sum_i u_i x_i - sum_{bonds ij} 2 w_ij x_i x_j
// with integer coefficients scaled by a common denominator.
struct Problem {
  std::vector<LatticePoint> sites;
  std::vector<std::vector<Neighbor>> nbrs;
  std::vector<std::int64_t> deg_s, deg_w, dweight;  // dweight: dissipation if the site flips state
  std::vector<char> in_prev;
  std::int64_t A = 0, B = 0, C = 0;  // strong, weak, dissipation unit
  Integer scale;                     // value = (A S + B W + C D) / scale
  std::int64_t D0 = 0;               // dissipation of the empty set

  std::size_t n() const { return sites.size(); }

  std::int64_t unary(int i) const {
    return A * deg_s[i] + B * deg_w[i] + (in_prev[i] ? -C * dweight[i] : C * dweight[i]);
  }
};

std::int64_t checked(const Integer& z) {
  if (!fits_int64(z)) throw std::overflow_error("scaled energy coefficients exceed 64 bits");
  return to_int64(z);
}

Problem build(const DiscreteSet& space, const DiscreteSet& Iprev, const Params& p) {
  Problem pr;
  pr.sites.assign(space.begin(), space.end());
  const std::size_t n = pr.sites.size();
  pr.nbrs.resize(n);
  pr.deg_s.assign(n, 0);
  pr.deg_w.assign(n, 0);
  pr.dweight.assign(n, 0);
  pr.in_prev.assign(n, 0);

  const Rational a = p.eps * p.beta, b = p.eps * p.eps * p.alpha, c = p.eps * p.eps * p.eps / p.tau;
  Integer den;
  mpz_lcm(den.get_mpz_t(), a.get_den().get_mpz_t(), b.get_den().get_mpz_t());
  mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), c.get_den().get_mpz_t());
  pr.scale = den;
  pr.A = checked(Integer(a.get_num() * (den / a.get_den())));
  pr.B = checked(Integer(b.get_num() * (den / b.get_den())));
  pr.C = checked(Integer(c.get_num() * (den / c.get_den())));

  auto index_of = [&](LatticePoint q) -> int {
    auto it = std::lower_bound(pr.sites.begin(), pr.sites.end(), q);
    return it != pr.sites.end() && *it == q ? static_cast<int>(it - pr.sites.begin()) : -1;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const LatticePoint s = pr.sites[i];
    for (const auto& q : {LatticePoint{s.i1 + 1, s.i2}, LatticePoint{s.i1 - 1, s.i2}, LatticePoint{s.i1, s.i2 + 1},
                          LatticePoint{s.i1, s.i2 - 1}}) {
      const bool strong = lattice::bond_kind(s, q) == BondKind::Strong;
      (strong ? pr.deg_s[i] : pr.deg_w[i]) += 1;
      const int j = index_of(q);
      if (j >= 0) pr.nbrs[i].push_back({j, strong ? pr.A : pr.B, strong});
    }
    pr.in_prev[i] = Iprev.contains(s) ? 1 : 0;
    pr.dweight[i] = lattice::chebyshev_distance(s, Iprev, !pr.in_prev[i]);
    if (pr.in_prev[i]) pr.D0 += pr.dweight[i];
  }
  return pr;
}

struct Best {
  i128 value = 0;
  bool any = false;
  std::uint64_t count = 0;
  std::uint64_t enumerated = 0;
  std::vector<std::uint32_t> masks;

  void offer(i128 v, std::uint32_t mask, std::size_t cap) {
    if (!any || v < value) {
      any = true;
      value = v;
      count = 0;
      masks.clear();
    }
    if (v == value) {
      ++count;
      if (masks.size() < cap) masks.push_back(mask);
    }
  }

  void merge(const Best& o, std::size_t cap) {
    enumerated += o.enumerated;
    if (!o.any) return;
    if (!any || o.value < value) {
      any = true;
      value = o.value;
      count = 0;
      masks.clear();
    }
    if (o.value == value) {
      count += o.count;
      masks.insert(masks.end(), o.masks.begin(), o.masks.end());
      if (masks.size() > cap) masks.resize(cap);
    }
  }
};

// Running (S, W, D) counts of the current subset.
struct Counts {
  std::int64_t S = 0, W = 0, D = 0;
};

void flip(const Problem& pr, std::uint32_t& mask, Counts& c, int i) {
  const bool adding = ((mask >> i) & 1U) == 0;
  std::int64_t ns = 0, nw = 0;
  for (const auto& nb : pr.nbrs[i]) {
    if ((mask >> nb.j) & 1U) (nb.strong ? ns : nw) += 1;
  }
  const std::int64_t sign = adding ? 1 : -1;
  c.S += sign * (pr.deg_s[i] - 2 * ns);
  c.W += sign * (pr.deg_w[i] - 2 * nw);
  c.D += (pr.in_prev[i] ? -sign : sign) * pr.dweight[i];
  mask ^= (1U << i);
}

i128 scaled(const Problem& pr, const Counts& c) {
  return i128(pr.A) * c.S + i128(pr.B) * c.W + i128(pr.C) * c.D;
}

Best gray_scan(const Problem& pr, int prefix_bits, std::uint32_t prefix, std::size_t cap) {
  const int n = static_cast<int>(pr.n());
  const int low = n - prefix_bits;
  std::uint32_t mask = 0;
  Counts c;
  c.D = pr.D0;
  for (int b = 0; b < prefix_bits; ++b) {
    if ((prefix >> b) & 1U) flip(pr, mask, c, low + b);
  }
  Best best;
  best.offer(scaled(pr, c), mask, cap);
  best.enumerated = 1;
  const std::uint64_t total = std::uint64_t{1} << low;
  for (std::uint64_t g = 1; g < total; ++g) {
    flip(pr, mask, c, std::countr_zero(g));
    best.offer(scaled(pr, c), mask, cap);
  }
  best.enumerated = total;
  return best;
}

struct Dfs {
  const Problem& pr;
  std::size_t cap;
  Best best;
  i128 bound;

  void run(int depth, std::uint32_t mask, i128 cur) {
    const int n = static_cast<int>(pr.n());
    if (depth == n) {
      ++best.enumerated;
      if (cur <= bound) {
        best.offer(cur, mask, cap);
        bound = best.value;
      }
      return;
    }
    // Lower bound: every undecided site takes its most favourable value,
    // crediting all its undecided bonds.
    i128 lb = cur;
    for (int j = depth; j < n; ++j) {
      i128 cj = pr.unary(j);
      for (const auto& nb : pr.nbrs[j]) {
        if (nb.j >= depth || ((mask >> nb.j) & 1U)) cj -= 2 * i128(nb.w);
      }
      if (cj < 0) lb += cj;
    }
    if (lb > bound) return;
    run(depth + 1, mask, cur);
    i128 add = pr.unary(depth);
    for (const auto& nb : pr.nbrs[depth]) {
      if (nb.j < depth && ((mask >> nb.j) & 1U)) add -= 2 * i128(nb.w);
    }
    run(depth + 1, mask | (1U << depth), cur + add);
  }
};

Rational to_rational(i128 v, const Integer& scale) {
  const bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
  Integer hi(static_cast<unsigned long>(u >> 64)), lo(static_cast<unsigned long>(u & ~std::uint64_t{0}));
  Integer z = hi;
  mpz_mul_2exp(z.get_mpz_t(), z.get_mpz_t(), 64);
  z += lo;
  if (neg) z = -z;
  Rational r(z, scale);
  r.canonicalize();
  return r;
}

DiscreteSet mask_to_set(const Problem& pr, std::uint32_t mask) {
  std::vector<LatticePoint> s;
  for (std::size_t i = 0; i < pr.n(); ++i) {
    if ((mask >> i) & 1U) s.push_back(pr.sites[i]);
  }
  return DiscreteSet(std::move(s));
}

bool contains_set(const std::vector<DiscreteSet>& v, const DiscreteSet& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

void compare_structured(OracleReport& r, const DiscreteSet& Iprev, const Params& p) {
  const auto dec = lattice::decompose(Iprev);
  if (const auto* bad = std::get_if<lattice::StructureViolation>(&dec)) {
    r.structured_note = "previous set is not a rectangle with islands: " + bad->reason;
    return;
  }
  const auto& state = std::get<lattice::RectState>(dec);
  const bool truncated = r.minimizer_count > r.minimizers.size();
  if (state.rect.empty()) {
    // Islands only: they all stay unless 4ag > 1.
    const DiscreteSet choice = regime_of(p) == Regime::WeakDissolve ? DiscreteSet() : Iprev;
    r.structured_value = lattice::step_energy(choice, Iprev, p).value;
    r.matches_structured = *r.structured_value == r.min_value && (truncated || contains_set(r.minimizers, choice));
    r.structured_note = "islands only";
    return;
  }
  flow::StepOptions so;
  so.mode = flow::Mode::Direct;
  const flow::StepOutcome o = flow::step_minimize(state, p, so);
  r.structured_value = lattice::perimeter_energy(Iprev, p).value + p.eps * o.value;
  const DiscreteSet chosen = flow::build_candidate(state, o.move, p);
  r.matches_structured = *r.structured_value == r.min_value && (truncated || contains_set(r.minimizers, chosen));
  if (truncated) return;

  // Every structured candidate, to restrict the oracle's minimizers to the family.
  const auto ext = flow::extents_of(state.rect);
  std::set<std::vector<LatticePoint>> family;
  auto add = [&](const flow::Move& m) {
    const DiscreteSet s = flow::build_candidate(state, m, p);
    family.insert({s.begin(), s.end()});
  };
  for (std::int64_t h = 0; 4 * h <= ext.n1; ++h) {
    for (std::int64_t k = 0; 4 * k <= ext.n2; ++k) {
      add({h, k, false, 0});
      add({h, k, false, 1});
    }
  }
  add({0, 0, true, 0});
  add({0, 0, true, 1});
  std::set<std::vector<LatticePoint>> structured_ties, oracle_in_family;
  if (*r.structured_value == r.min_value) {
    for (const auto& m : o.ties) {
      const DiscreteSet s = flow::build_candidate(state, m, p);
      structured_ties.insert({s.begin(), s.end()});
    }
  }
  for (const auto& m : r.minimizers) {
    std::vector<LatticePoint> v(m.begin(), m.end());
    if (family.count(v) != 0) oracle_in_family.insert(std::move(v));
  }
  r.ties_match = structured_ties == oracle_in_family;
}

}  // namespace

DiscreteSet search_space(const DiscreteSet& Iprev, int collar) {
  if (collar < 0) throw std::invalid_argument("collar must be nonnegative");
  if (collar == 0 || Iprev.empty()) return Iprev;
  std::vector<LatticePoint> out;
  const auto box = Iprev.bbox().expanded(collar);
  for (std::int64_t a = box.lo1; a <= box.hi1; ++a) {
    for (std::int64_t b = box.lo2; b <= box.hi2; ++b) {
      if (lattice::chebyshev_distance({a, b}, Iprev, true) <= collar) out.push_back({a, b});
    }
  }
  return DiscreteSet(std::move(out));
}

OracleReport exhaustive_minimize(const DiscreteSet& Iprev, const Params& p, const OracleOptions& opt) {
  const DiscreteSet space = search_space(Iprev, opt.collar);
  if (space.size() > opt.max_sites || space.size() > 31) {
    throw SearchSpaceTooLarge("search space has " + std::to_string(space.size()) + " sites; the limit is " +
                              std::to_string(std::min<std::size_t>(opt.max_sites, 31)));
  }
  const Problem pr = build(space, Iprev, p);
  const int n = static_cast<int>(pr.n());

  Best best;
  if (opt.prune) {
    Dfs dfs{pr, opt.max_minimizers, {}, 0};
    Counts c;
    c.D = pr.D0;
    std::uint32_t m = 0;
    for (int i = 0; i < n; ++i) {
      if (pr.in_prev[i]) flip(pr, m, c, i);
    }
    dfs.bound = scaled(pr, c);  // Iprev itself is an upper bound
    dfs.run(0, 0, i128(pr.C) * pr.D0);
    best = std::move(dfs.best);
  } else {
    const int workers = std::max(1, opt.workers);
    int bits = 0;
    while ((1 << (bits + 1)) <= workers && bits + 1 <= n) ++bits;
    const std::uint32_t prefixes = 1U << bits;
    std::vector<Best> parts(prefixes);
    if (workers == 1) {
      parts[0] = gray_scan(pr, 0, 0, opt.max_minimizers);
    } else {
      std::vector<std::thread> pool;
      for (std::uint32_t q = 0; q < prefixes; ++q) {
        pool.emplace_back([&, q] { parts[q] = gray_scan(pr, bits, q, opt.max_minimizers); });
      }
      for (auto& t : pool) t.join();
    }
    for (const auto& part : parts) best.merge(part, opt.max_minimizers);
  }

  std::sort(best.masks.begin(), best.masks.end());
  OracleReport r;
  r.search_sites = pr.n();
  r.enumerated = best.enumerated;
  r.minimizer_count = best.count;
  r.min_value = to_rational(best.value, pr.scale);
  for (const auto m : best.masks) r.minimizers.push_back(mask_to_set(pr, m));
  std::sort(r.minimizers.begin(), r.minimizers.end(), [](const DiscreteSet& a, const DiscreteSet& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  });
  r.subset_ok = std::all_of(r.minimizers.begin(), r.minimizers.end(),
                            [&](const DiscreteSet& s) { return lattice::is_subset(s, Iprev); });
  r.structure_ok = std::all_of(r.minimizers.begin(), r.minimizers.end(), [](const DiscreteSet& s) {
    return std::holds_alternative<lattice::RectState>(lattice::decompose(s));
  });
  compare_structured(r, Iprev, p);
  return r;
}

bool verify_structure(const OracleReport& report, const DiscreteSet& Iprev) {
  return std::all_of(report.minimizers.begin(), report.minimizers.end(), [&](const DiscreteSet& s) {
    return lattice::is_subset(s, Iprev) && std::holds_alternative<lattice::RectState>(lattice::decompose(s));
  });
}

std::string summary_line(const OracleReport& r) {
  return "min=" + r.min_value.get_num().get_str() + "/" + r.min_value.get_den().get_str() +
         " count=" + std::to_string(r.minimizer_count) + " structured_match=" + (r.matches_structured ? "true" : "false");
}

nlohmann::json to_json(const OracleReport& r) {
  nlohmann::json mins = nlohmann::json::array();
  for (const auto& m : r.minimizers) mins.push_back(lattice::to_json(m).at("sites"));
  nlohmann::json j = {{"min_value", mushy::to_json(r.min_value)},
                      {"minimizers", mins},
                      {"minimizer_count", r.minimizer_count},
                      {"structure_ok", r.structure_ok},
                      {"subset_ok", r.subset_ok},
                      {"matches_structured", r.matches_structured},
                      {"enumerated", r.enumerated},
                      {"search_sites", r.search_sites},
                      {"summary", summary_line(r)}};
  j["ties_match"] = r.ties_match ? nlohmann::json(*r.ties_match) : nlohmann::json(nullptr);
  j["structured_value"] = r.structured_value ? mushy::to_json(*r.structured_value) : nlohmann::json(nullptr);
  if (!r.structured_note.empty()) j["structured_note"] = r.structured_note;
  return j;
}

}  // namespace mushy::oracle

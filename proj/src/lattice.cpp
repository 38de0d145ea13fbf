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

#include "mushy/lattice.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <limits>
#include <sstream>

namespace mushy::lattice {
namespace {

constexpr std::int32_t kFar = std::numeric_limits<std::int32_t>::max() / 2;

bool is_odd(std::int64_t v) { return (v % 2) != 0; }

constexpr std::array<std::array<int, 2>, 4> kAxis = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

// Two-pass chessboard distance transform on a cols x rows grid; cells with
// d == 0 on input are sources.
void chessboard_transform(std::vector<std::int32_t>& d, std::int64_t cols, std::int64_t rows) {
  auto at = [&](std::int64_t c, std::int64_t r) -> std::int32_t& { return d[r * cols + c]; };
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      std::int32_t v = at(c, r);
      if (c > 0) v = std::min(v, at(c - 1, r) + 1);
      if (r > 0) {
        v = std::min(v, at(c, r - 1) + 1);
        if (c > 0) v = std::min(v, at(c - 1, r - 1) + 1);
        if (c + 1 < cols) v = std::min(v, at(c + 1, r - 1) + 1);
      }
      at(c, r) = v;
    }
  }
  for (std::int64_t r = rows - 1; r >= 0; --r) {
    for (std::int64_t c = cols - 1; c >= 0; --c) {
      std::int32_t v = at(c, r);
      if (c + 1 < cols) v = std::min(v, at(c + 1, r) + 1);
      if (r + 1 < rows) {
        v = std::min(v, at(c, r + 1) + 1);
        if (c + 1 < cols) v = std::min(v, at(c + 1, r + 1) + 1);
        if (c > 0) v = std::min(v, at(c - 1, r + 1) + 1);
      }
      at(c, r) = v;
    }
  }
}

}  // namespace

BondKind bond_kind(LatticePoint i, LatticePoint j) {
  if (i.i1 == j.i1 && (i.i2 - j.i2 == 1 || j.i2 - i.i2 == 1)) {
    return is_odd(i.i1) ? BondKind::Strong : BondKind::Weak;
  }
  if (i.i2 == j.i2 && (i.i1 - j.i1 == 1 || j.i1 - i.i1 == 1)) {
    return is_odd(i.i2) ? BondKind::Strong : BondKind::Weak;
  }
  return BondKind::NotNeighbors;
}

std::int64_t chebyshev(LatticePoint a, LatticePoint b) {
  return std::max(a.i1 > b.i1 ? a.i1 - b.i1 : b.i1 - a.i1, a.i2 > b.i2 ? a.i2 - b.i2 : b.i2 - a.i2);
}

bool IntRect::has_even_vertices() const {
  return !empty() && !is_odd(lo1) && !is_odd(hi1) && !is_odd(lo2) && !is_odd(hi2);
}

bool IntRect::operator==(const IntRect& o) const {
  if (empty() || o.empty()) return empty() && o.empty();
  return lo1 == o.lo1 && hi1 == o.hi1 && lo2 == o.lo2 && hi2 == o.hi2;
}

IntRect hull(const IntRect& a, const IntRect& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return {std::min(a.lo1, b.lo1), std::max(a.hi1, b.hi1), std::min(a.lo2, b.lo2), std::max(a.hi2, b.hi2)};
}

DiscreteSet::DiscreteSet(std::vector<LatticePoint> sites) : sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end());
  sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  index();
}

DiscreteSet DiscreteSet::from_rect(const IntRect& r) {
  std::vector<LatticePoint> s;
  if (!r.empty()) {
    s.reserve(static_cast<std::size_t>(r.site_count()));
    for (std::int64_t a = r.lo1; a <= r.hi1; ++a) {
      for (std::int64_t b = r.lo2; b <= r.hi2; ++b) s.push_back({a, b});
    }
  }
  return DiscreteSet(std::move(s));
}

void DiscreteSet::index() {
  bitmap_.clear();
  if (sites_.empty()) {
    bbox_ = IntRect::empty_rect();
    return;
  }
  bbox_ = {sites_.front().i1, sites_.back().i1, sites_.front().i2, sites_.front().i2};
  for (const auto& s : sites_) {
    bbox_.lo2 = std::min(bbox_.lo2, s.i2);
    bbox_.hi2 = std::max(bbox_.hi2, s.i2);
  }
  const std::int64_t w = bbox_.hi1 - bbox_.lo1 + 1;
  const std::int64_t h = bbox_.hi2 - bbox_.lo2 + 1;
  if (w > (std::int64_t{1} << 31) / h) return;
  const std::int64_t area = w * h;
  if (area > 4096 && area > 16 * static_cast<std::int64_t>(sites_.size())) return;
  bitmap_.assign(static_cast<std::size_t>(area), 0);
  for (const auto& s : sites_) bitmap_[(s.i2 - bbox_.lo2) * w + (s.i1 - bbox_.lo1)] = 1;
}

bool DiscreteSet::contains(LatticePoint p) const {
  if (sites_.empty() || !bbox_.contains(p)) return false;
  if (!bitmap_.empty()) {
    const std::int64_t w = bbox_.hi1 - bbox_.lo1 + 1;
    return bitmap_[(p.i2 - bbox_.lo2) * w + (p.i1 - bbox_.lo1)] != 0;
  }
  return std::binary_search(sites_.begin(), sites_.end(), p);
}

DiscreteSet DiscreteSet::translated(std::int64_t d1, std::int64_t d2) const {
  std::vector<LatticePoint> s(sites_);
  for (auto& x : s) {
    x.i1 += d1;
    x.i2 += d2;
  }
  return DiscreteSet(std::move(s));
}

DiscreteSet set_union(const DiscreteSet& a, const DiscreteSet& b) {
  std::vector<LatticePoint> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return DiscreteSet(std::move(out));
}

DiscreteSet set_difference(const DiscreteSet& a, const DiscreteSet& b) {
  std::vector<LatticePoint> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return DiscreteSet(std::move(out));
}

DiscreteSet set_intersection(const DiscreteSet& a, const DiscreteSet& b) {
  std::vector<LatticePoint> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return DiscreteSet(std::move(out));
}

bool is_subset(const DiscreteSet& a, const DiscreteSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

DiscreteSet even_sites(const DiscreteSet& a) {
  std::vector<LatticePoint> out;
  for (const auto& s : a) {
    if (is_even_site(s)) out.push_back(s);
  }
  return DiscreteSet(std::move(out));
}

CutCounts cut_counts(const DiscreteSet& I) {
  CutCounts c;
  for (const auto& s : I) {
    for (const auto& d : kAxis) {
      const LatticePoint n{s.i1 + d[0], s.i2 + d[1]};
      if (I.contains(n)) continue;
      if (bond_kind(s, n) == BondKind::Strong) {
        ++c.strong;
      } else {
        ++c.weak;
      }
    }
  }
  return c;
}

Rational perimeter_energy_from_counts(const CutCounts& c, const Params& p) {
  return p.eps * p.beta * make_rational(c.strong) +
         p.eps * p.eps * p.alpha * make_rational(c.weak);
}

Energy perimeter_energy(const DiscreteSet& I, const Params& p) {
  return {perimeter_energy_from_counts(cut_counts(I), p)};
}

std::int64_t chebyshev_distance(LatticePoint p, const DiscreteSet& S, bool to_member) {
  if (S.contains(p) == to_member) return 0;
  if (to_member && S.empty()) throw EmptyReferenceSet("Chebyshev distance to an empty set");
  for (std::int64_t r = 1;; ++r) {
    for (std::int64_t a = -r; a <= r; ++a) {
      const std::array<LatticePoint, 4> ring = {LatticePoint{p.i1 + a, p.i2 - r}, LatticePoint{p.i1 + a, p.i2 + r},
                                                LatticePoint{p.i1 - r, p.i2 + a}, LatticePoint{p.i1 + r, p.i2 + a}};
      for (const auto& q : ring) {
        if (S.contains(q) == to_member) return r;
      }
    }
  }
}

ChebyshevField::ChebyshevField(const DiscreteSet& ref, const IntRect& window)
    : ref_(&ref), window_(hull(ref.bbox().expanded(1), window)) {
  if (window_.empty()) return;
  cols_ = window_.hi1 - window_.lo1 + 1;
  const std::int64_t rows = window_.hi2 - window_.lo2 + 1;
  const std::size_t n = static_cast<std::size_t>(cols_ * rows);
  to_member_.assign(n, kFar);
  to_complement_.assign(n, 0);
  for (const auto& s : ref) {
    const std::size_t idx = static_cast<std::size_t>((s.i2 - window_.lo2) * cols_ + (s.i1 - window_.lo1));
    to_member_[idx] = 0;
    to_complement_[idx] = kFar;
  }
  if (!ref.empty()) chessboard_transform(to_member_, cols_, rows);
  chessboard_transform(to_complement_, cols_, rows);
}

std::int64_t ChebyshevField::distance(LatticePoint p) const {
  if (window_.empty() || !window_.contains(p)) return chebyshev_distance(p, *ref_, !ref_->contains(p));
  const std::size_t idx = static_cast<std::size_t>((p.i2 - window_.lo2) * cols_ + (p.i1 - window_.lo1));
  if (ref_->contains(p)) return to_complement_[idx];
  if (ref_->empty()) throw EmptyReferenceSet("Chebyshev distance to an empty set");
  return to_member_[idx];
}

std::int64_t dissipation_sum(const DiscreteSet& I, const DiscreteSet& Iprev, const ChebyshevField& prev_field) {
  std::int64_t sum = 0;
  for (const auto& s : Iprev) {
    if (!I.contains(s)) sum += prev_field.distance(s);
  }
  for (const auto& s : I) {
    if (!Iprev.contains(s)) sum += prev_field.distance(s);
  }
  return sum;
}

std::int64_t dissipation_sum(const DiscreteSet& I, const DiscreteSet& Iprev) {
  const ChebyshevField field(Iprev, I.bbox());
  return dissipation_sum(I, Iprev, field);
}

Energy dissipation(const DiscreteSet& I, const DiscreteSet& Iprev, const Params& p) {
  const std::int64_t d = dissipation_sum(I, Iprev);
  return {p.eps * p.eps * p.eps * make_rational(d)};
}

Energy step_energy(const DiscreteSet& I, const DiscreteSet& Iprev, const Params& p) {
  return {perimeter_energy(I, p).value + dissipation(I, Iprev, p).value / p.tau};
}

std::vector<DiscreteSet> connected_components(const DiscreteSet& I) {
  const auto sites = I.sites();
  std::vector<char> seen(sites.size(), 0);
  auto index_of = [&](LatticePoint q) -> std::ptrdiff_t {
    auto it = std::lower_bound(sites.begin(), sites.end(), q);
    if (it == sites.end() || *it != q) return -1;
    return it - sites.begin();
  };
  std::vector<DiscreteSet> out;
  for (std::size_t start = 0; start < sites.size(); ++start) {
    if (seen[start]) continue;
    std::vector<LatticePoint> comp;
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const LatticePoint s = sites[queue.front()];
      queue.pop_front();
      comp.push_back(s);
      for (int d1 = -1; d1 <= 1; ++d1) {
        for (int d2 = -1; d2 <= 1; ++d2) {
          const LatticePoint n{s.i1 + d1, s.i2 + d2};
          if ((d1 == 0 && d2 == 0) || !I.contains(n)) continue;
          const auto j = static_cast<std::size_t>(index_of(n));
          if (!seen[j]) {
            seen[j] = 1;
            queue.push_back(j);
          }
        }
      }
    }
    out.emplace_back(std::move(comp));
  }
  return out;
}

bool is_connected(const DiscreteSet& I) { return connected_components(I).size() <= 1; }

DiscreteSet RectState::materialize() const { return set_union(DiscreteSet::from_rect(rect), islands); }

Decomposition decompose(const DiscreteSet& I) {
  const auto comps = connected_components(I);
  const DiscreteSet* bulk = nullptr;
  for (const auto& c : comps) {
    auto odd = std::find_if(c.begin(), c.end(), [](LatticePoint s) { return !is_even_site(s); });
    if (odd == c.end()) continue;
    if (bulk != nullptr) return StructureViolation{*odd, "more than one component contains non-even sites"};
    bulk = &c;
  }
  if (bulk == nullptr) return RectState{IntRect::empty_rect(), I};
  const IntRect box = bulk->bbox();
  if (!box.has_even_vertices()) {
    return StructureViolation{bulk->sites().front(), "bulky component has a bounding box with odd vertices"};
  }
  if (static_cast<std::int64_t>(bulk->size()) != box.site_count()) {
    for (std::int64_t a = box.lo1; a <= box.hi1; ++a) {
      for (std::int64_t b = box.lo2; b <= box.hi2; ++b) {
        if (!bulk->contains({a, b})) return StructureViolation{{a, b}, "bulky component does not fill its bounding box"};
      }
    }
  }
  return RectState{box, set_difference(I, *bulk)};
}

std::string to_text(const DiscreteSet& I) {
  std::ostringstream os;
  for (const auto& s : I) os << s.i1 << ' ' << s.i2 << '\n';
  return os.str();
}

DiscreteSet set_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<LatticePoint> out;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    LatticePoint p;
    std::string rest;
    if (!(ls >> p.i1 >> p.i2) || (ls >> rest)) {
      throw ParseError("bad site on line " + std::to_string(lineno) + ": '" + line + "'");
    }
    out.push_back(p);
  }
  return DiscreteSet(std::move(out));
}

nlohmann::json to_json(const DiscreteSet& I) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : I) arr.push_back({s.i1, s.i2});
  return {{"sites", arr}};
}

DiscreteSet set_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("sites") || !j.at("sites").is_array()) {
    throw ParseError("expected {\"sites\": [[i1, i2], ...]}");
  }
  std::vector<LatticePoint> out;
  for (const auto& e : j.at("sites")) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
      throw ParseError("site entries must be integer pairs");
    }
    out.push_back({e[0].get<std::int64_t>(), e[1].get<std::int64_t>()});
  }
  return DiscreteSet(std::move(out));
}

}  // namespace mushy::lattice

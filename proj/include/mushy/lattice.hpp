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

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mushy/params.hpp"
#include "mushy/rational.hpp"

namespace mushy::lattice {

using mushy::to_json;

struct LatticePoint {
  std::int64_t i1 = 0;  // column
  std::int64_t i2 = 0;  // row
  auto operator<=>(const LatticePoint&) const = default;
};

inline bool is_even_site(LatticePoint p) { return p.i1 % 2 == 0 && p.i2 % 2 == 0; }

enum class BondKind { Strong, Weak, NotNeighbors };

// Axis neighbours sharing an odd coordinate are strongly coupled, those
// sharing an even one weakly. Diagonal and distant pairs share nothing.
BondKind bond_kind(LatticePoint i, LatticePoint j);

std::int64_t chebyshev(LatticePoint a, LatticePoint b);

// Closed integer rectangle [lo1, hi1] x [lo2, hi2]; empty when bounds cross.
struct IntRect {
  std::int64_t lo1 = 0, hi1 = -1, lo2 = 0, hi2 = -1;

  static IntRect empty_rect() { return {}; }
  bool empty() const { return lo1 > hi1 || lo2 > hi2; }
  std::int64_t width() const { return empty() ? 0 : hi1 - lo1; }   // lattice extent along i1
  std::int64_t height() const { return empty() ? 0 : hi2 - lo2; }  // lattice extent along i2
  std::int64_t site_count() const { return empty() ? 0 : (hi1 - lo1 + 1) * (hi2 - lo2 + 1); }
  bool contains(LatticePoint p) const { return p.i1 >= lo1 && p.i1 <= hi1 && p.i2 >= lo2 && p.i2 <= hi2; }
  bool has_even_vertices() const;
  IntRect expanded(std::int64_t r) const { return empty() ? *this : IntRect{lo1 - r, hi1 + r, lo2 - r, hi2 + r}; }
  bool operator==(const IntRect& o) const;
};

IntRect hull(const IntRect& a, const IntRect& b);

// Finite set of lattice sites. Sites are kept sorted; membership goes
// through a dense bitmap over the bounding box when the box is not much
// larger than the set, and binary search otherwise.
class DiscreteSet {
 public:
  DiscreteSet() = default;
  explicit DiscreteSet(std::vector<LatticePoint> sites);
  DiscreteSet(std::initializer_list<LatticePoint> sites) : DiscreteSet(std::vector<LatticePoint>(sites)) {}

  static DiscreteSet from_rect(const IntRect& r);

  bool contains(LatticePoint p) const;
  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  std::span<const LatticePoint> sites() const { return sites_; }
  auto begin() const { return sites_.begin(); }
  auto end() const { return sites_.end(); }
  const IntRect& bbox() const { return bbox_; }

  DiscreteSet translated(std::int64_t d1, std::int64_t d2) const;

  bool operator==(const DiscreteSet& o) const { return sites_ == o.sites_; }

 private:
  void index();

  std::vector<LatticePoint> sites_;
  IntRect bbox_;
  std::vector<std::uint8_t> bitmap_;
};

DiscreteSet set_union(const DiscreteSet& a, const DiscreteSet& b);
DiscreteSet set_difference(const DiscreteSet& a, const DiscreteSet& b);
DiscreteSet set_intersection(const DiscreteSet& a, const DiscreteSet& b);
bool is_subset(const DiscreteSet& a, const DiscreteSet& b);
DiscreteSet even_sites(const DiscreteSet& a);

// Physical energy value (strong terms carry eps, weak terms eps^2).
struct Energy {
  Rational value;
  bool operator==(const Energy& o) const { return value == o.value; }
  bool operator<(const Energy& o) const { return value < o.value; }
  bool operator<=(const Energy& o) const { return value <= o.value; }
  bool operator>(const Energy& o) const { return value > o.value; }
};

// Number of cut bonds (i in I, j not in I) of each kind.
struct CutCounts {
  std::int64_t strong = 0;
  std::int64_t weak = 0;
  bool operator==(const CutCounts&) const = default;
};

CutCounts cut_counts(const DiscreteSet& I);
Energy perimeter_energy(const DiscreteSet& I, const Params& p);
Rational perimeter_energy_from_counts(const CutCounts& c, const Params& p);

class EmptyReferenceSet : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Chebyshev distance from p to the nearest site q with (q in S) == to_member,
// by expanding rings around p.
std::int64_t chebyshev_distance(LatticePoint p, const DiscreteSet& S, bool to_member);

// Chessboard distance transform of a reference set over a window. For a
// member it stores the distance to the complement, for a non-member the
// distance to the set.
class ChebyshevField {
 public:
  ChebyshevField(const DiscreteSet& ref, const IntRect& window);
  explicit ChebyshevField(const DiscreteSet& ref) : ChebyshevField(ref, ref.bbox()) {}

  std::int64_t distance(LatticePoint p) const;
  const IntRect& window() const { return window_; }

 private:
  const DiscreteSet* ref_;
  IntRect window_;
  std::int64_t cols_ = 0;
  std::vector<std::int32_t> to_member_;
  std::vector<std::int32_t> to_complement_;
};

// Sum of Chebyshev distances over the symmetric difference, as in the
// dissipation: removed sites measure to the complement of Iprev, added
// sites to Iprev itself.
std::int64_t dissipation_sum(const DiscreteSet& I, const DiscreteSet& Iprev);
std::int64_t dissipation_sum(const DiscreteSet& I, const DiscreteSet& Iprev, const ChebyshevField& prev_field);

Energy dissipation(const DiscreteSet& I, const DiscreteSet& Iprev, const Params& p);
Energy step_energy(const DiscreteSet& I, const DiscreteSet& Iprev, const Params& p);

// 8-connectivity: sites whose closed unit squares touch.
std::vector<DiscreteSet> connected_components(const DiscreteSet& I);
bool is_connected(const DiscreteSet& I);

// Bulky rectangle with even vertices plus isolated even-sublattice islands
// kept outside it.
struct RectState {
  IntRect rect;
  DiscreteSet islands;

  DiscreteSet materialize() const;
  bool operator==(const RectState& o) const { return rect == o.rect && islands == o.islands; }
};

struct StructureViolation {
  LatticePoint witness;
  std::string reason;
};

using Decomposition = std::variant<RectState, StructureViolation>;

Decomposition decompose(const DiscreteSet& I);

// "i1 i2" per line.
std::string to_text(const DiscreteSet& I);
DiscreteSet set_from_text(const std::string& text);
nlohmann::json to_json(const DiscreteSet& I);
DiscreteSet set_from_json(const nlohmann::json& j);

}  // namespace mushy::lattice

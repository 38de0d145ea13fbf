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
#include <vector>

#include "json.hpp"
#include "mushy/lattice.hpp"
#include "mushy/params.hpp"
#include "mushy/rational.hpp"

namespace mushy::oracle {

using lattice::DiscreteSet;

class SearchSpaceTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

struct OracleOptions {
  int collar = 1;  // ring width of extra sites around Iprev
  bool prune = false;
  int workers = 1;
  std::size_t max_sites = 28;
  std::size_t max_minimizers = 4096;  // kept minimizers; the count is exact regardless
};

struct OracleReport {
  std::vector<DiscreteSet> minimizers;
  std::uint64_t minimizer_count = 0;
  Rational min_value;  // E(I, Iprev) in physical units
  bool structure_ok = false;
  bool subset_ok = false;
  bool matches_structured = false;
  std::optional<bool> ties_match;  // structured ties == oracle minimizers within the family
  std::optional<Rational> structured_value;
  std::string structured_note;
  std::uint64_t enumerated = 0;
  std::size_t search_sites = 0;
};

// Search space: Iprev plus every site within Chebyshev distance `collar`.
DiscreteSet search_space(const DiscreteSet& Iprev, int collar);

OracleReport exhaustive_minimize(const DiscreteSet& Iprev, const Params& p, const OracleOptions& opt = {});

bool verify_structure(const OracleReport& report, const DiscreteSet& Iprev);

std::string summary_line(const OracleReport& r);
nlohmann::json to_json(const OracleReport& r);

}  // namespace mushy::oracle

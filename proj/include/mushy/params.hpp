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

#include <string>

#include "mushy/rational.hpp"

namespace mushy {

class InvalidParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Model constants: weak coupling alpha, strong coupling beta, lattice
// spacing eps and time step tau. gamma = tau / eps is kept exact.
struct Params {
  Rational alpha;
  Rational beta;
  Rational eps;
  Rational tau;
  Rational gamma;

  static Params make(Rational alpha, Rational beta, Rational eps, Rational tau);
  static Params with_gamma(Rational alpha, Rational beta, Rational eps, Rational gamma);

  // 4 * alpha * gamma, the quantity every regime split is decided on.
  Rational four_alpha_gamma() const { return 4 * alpha * gamma; }
};

// Behaviour of the even-sublattice islands left outside the bulky rectangle.
enum class Regime {
  WeakRetain,    // 4ag < 1: islands cost less than their removal
  Boundary,      // 4ag = 1: energetically indifferent
  WeakDissolve,  // 4ag > 1: islands within depth 2N-1 are removed
};

Regime regime_of(const Params& p);
std::string to_string(Regime r);

}  // namespace mushy

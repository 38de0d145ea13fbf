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

#include "mushy/params.hpp"

namespace mushy {

Params Params::make(Rational alpha, Rational beta, Rational eps, Rational tau) {
  if (alpha <= 0) throw InvalidParams("alpha must be positive");
  if (beta <= 0) throw InvalidParams("beta must be positive");
  if (eps <= 0) throw InvalidParams("eps must be positive");
  if (tau <= 0) throw InvalidParams("tau must be positive");
  Params p{alpha, beta, eps, tau, Rational(tau / eps)};
  p.gamma.canonicalize();
  return p;
}

Params Params::with_gamma(Rational alpha, Rational beta, Rational eps, Rational gamma) {
  if (gamma <= 0) throw InvalidParams("gamma must be positive");
  return make(std::move(alpha), std::move(beta), eps, Rational(gamma * eps));
}

Regime regime_of(const Params& p) {
  const Rational x = p.four_alpha_gamma();
  if (x < 1) return Regime::WeakRetain;
  if (x == 1) return Regime::Boundary;
  return Regime::WeakDissolve;
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::WeakRetain:
      return "WeakRetain";
    case Regime::Boundary:
      return "Boundary";
    case Regime::WeakDissolve:
      return "WeakDissolve";
  }
  return "?";
}

}  // namespace mushy

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
#include <stdexcept>
#include <string>
#include <string_view>

#include <gmpxx.h>

#include "json.hpp"

namespace mushy {

// Exact rational arithmetic. Every energy comparison in the discrete model
// goes through this type; doubles only appear in the continuum limit.
using Rational = mpq_class;
using Integer = mpz_class;

class ParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Accepts "p/q", integers and plain decimals ("0.125", "-3.5e-2"). Decimals
// are converted from their literal digits, so "0.1" is exactly 1/10.
Rational parse_rational(std::string_view text);

Rational make_rational(std::int64_t num, std::int64_t den = 1);

Integer floor_of(const Rational& x);
Integer ceil_of(const Rational& x);

// Floor as a machine integer; throws std::overflow_error if it does not fit.
std::int64_t floor_int(const Rational& x);

bool fits_int64(const Integer& z);
std::int64_t to_int64(const Integer& z);

bool is_integer(const Rational& x);

std::string to_string(const Rational& x);  // "p/q" or "p"
double to_double(const Rational& x);

// {"num": n, "den": d}; components that exceed int64 are emitted as strings.
nlohmann::json to_json(const Rational& x);
Rational rational_from_json(const nlohmann::json& j);

}  // namespace mushy

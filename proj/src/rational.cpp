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

#include "mushy/rational.hpp"

#include <cctype>
#include <limits>

namespace mushy {

namespace {

Integer parse_integer_digits(std::string_view digits, std::string_view original) {
  if (digits.empty()) throw ParseError("malformed number: '" + std::string(original) + "'");
  for (char c : digits) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw ParseError("malformed number: '" + std::string(original) + "'");
  }
  return Integer(std::string(digits), 10);
}

Integer pow10(long e) {
  Integer r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, static_cast<unsigned long>(e));
  return r;
}

Rational parse_decimal(std::string_view text, std::string_view original) {
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  long exponent = 0;
  if (auto e = text.find_first_of("eE"); e != std::string_view::npos) {
    std::string_view exp_part = text.substr(e + 1);
    bool exp_negative = false;
    if (!exp_part.empty() && (exp_part.front() == '-' || exp_part.front() == '+')) {
      exp_negative = exp_part.front() == '-';
      exp_part.remove_prefix(1);
    }
    Integer ez = parse_integer_digits(exp_part, original);
    if (!ez.fits_slong_p() || abs(ez) > 4096) throw ParseError("exponent out of range: '" + std::string(original) + "'");
    exponent = ez.get_si();
    if (exp_negative) exponent = -exponent;
    text = text.substr(0, e);
  }
  std::string_view int_part = text;
  std::string_view frac_part;
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    int_part = text.substr(0, dot);
    frac_part = text.substr(dot + 1);
  }
  if (int_part.empty() && frac_part.empty()) throw ParseError("malformed number: '" + std::string(original) + "'");
  std::string all_digits = std::string(int_part) + std::string(frac_part);
  Integer mantissa = parse_integer_digits(all_digits, original);
  exponent -= static_cast<long>(frac_part.size());
  Rational r(mantissa);
  if (exponent > 0) r *= pow10(exponent);
  if (exponent < 0) r /= pow10(-exponent);
  r.canonicalize();
  return negative ? Rational(-r) : r;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string_view original = text;
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) throw ParseError("empty number");
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational num = parse_decimal(text.substr(0, slash), original);
    Rational den = parse_decimal(text.substr(slash + 1), original);
    if (den == 0) throw ParseError("zero denominator: '" + std::string(original) + "'");
    Rational r = num / den;
    r.canonicalize();
    return r;
  }
  return parse_decimal(text, original);
}

Rational make_rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::invalid_argument("zero denominator");
  Rational r(Integer(std::to_string(num)), Integer(std::to_string(den)));
  r.canonicalize();
  return r;
}

Integer floor_of(const Rational& x) {
  Integer q;
  mpz_fdiv_q(q.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  return q;
}

Integer ceil_of(const Rational& x) {
  Integer q;
  mpz_cdiv_q(q.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  return q;
}

bool fits_int64(const Integer& z) {
  static const Integer lo(std::to_string(std::numeric_limits<std::int64_t>::min()));
  static const Integer hi(std::to_string(std::numeric_limits<std::int64_t>::max()));
  return z >= lo && z <= hi;
}

std::int64_t to_int64(const Integer& z) {
  if (!fits_int64(z)) throw std::overflow_error("integer does not fit in 64 bits: " + z.get_str());
  return std::stoll(z.get_str());
}

std::int64_t floor_int(const Rational& x) { return to_int64(floor_of(x)); }

bool is_integer(const Rational& x) { return mpz_divisible_p(x.get_num_mpz_t(), x.get_den_mpz_t()) != 0; }

std::string to_string(const Rational& x) {
  Rational c = x;
  c.canonicalize();
  return c.get_str();
}

double to_double(const Rational& x) { return x.get_d(); }

nlohmann::json to_json(const Rational& x) {
  auto component = [](const Integer& z) -> nlohmann::json {
    if (fits_int64(z)) return to_int64(z);
    return z.get_str();
  };
  Rational c = x;
  c.canonicalize();
  return nlohmann::json{{"num", component(c.get_num())}, {"den", component(c.get_den())}};
}

Rational rational_from_json(const nlohmann::json& j) {
  auto component = [](const nlohmann::json& c) -> Integer {
    if (c.is_number_integer()) return Integer(std::to_string(c.get<std::int64_t>()));
    if (c.is_string()) return Integer(c.get<std::string>());
    throw ParseError("rational component must be an integer or a digit string");
  };
  if (!j.is_object() || !j.contains("num") || !j.contains("den"))
    throw ParseError("rational must be an object {num, den}");
  Integer den = component(j.at("den"));
  if (den == 0) throw ParseError("zero denominator");
  Rational r(component(j.at("num")), den);
  r.canonicalize();
  return r;
}

}  // namespace mushy

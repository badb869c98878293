#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>

#include "fincover/errors.hpp"

namespace fincover {

// Exact arithmetic only: every quantity in this library is an arbitrary
// precision integer or rational. There is no floating point anywhere.
using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Int rat_num(const Rational& q) { return boost::multiprecision::numerator(q); }
inline Int rat_den(const Rational& q) { return boost::multiprecision::denominator(q); }

inline Int int_gcd(const Int& a, const Int& b) { return boost::multiprecision::gcd(a, b); }
inline Int int_lcm(const Int& a, const Int& b) {
  if (a == 0 || b == 0) return 0;
  return boost::multiprecision::lcm(a, b);
}

// Canonical form "num/den" with positive denominator; integers print bare.
inline std::string rat_to_string(const Rational& q) {
  Int n = rat_num(q), d = rat_den(q);
  if (d == 1) return n.str();
  return n.str() + "/" + d.str();
}

inline Rational rat_from_string(const std::string& s) {
  auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(Int(s));
    Int n(s.substr(0, slash));
    Int d(s.substr(slash + 1));
    if (d == 0) throw Error(ErrorCode::ParseError, "zero denominator in rational '" + s + "'");
    return Rational(n, d);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, "bad rational '" + s + "'");
  }
}

// Least positive k with k*q an integer.
inline Int denominator_clearing_factor(const Rational& q) { return rat_den(q); }

// Exact conversion; throws when q is not an integer.
inline Int rat_to_int(const Rational& q) {
  if (rat_den(q) != 1)
    throw Error(ErrorCode::NonPositiveSolution, "expected an integer, got " + rat_to_string(q));
  return rat_num(q);
}

}  // namespace fincover

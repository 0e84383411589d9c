#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cgt {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Parses "3", "-0.25", "7/20" exactly.
Rational parse_rational(const std::string& s);

// Exact conversion; every finite double is a dyadic rational.
Rational rational_from_double(double d);

double to_double(const Rational& r);

// Decimal rendering without loss: falls back to "p/q" when the
// denominator is not of the form 2^a 5^b.
std::string rational_to_string(const Rational& r);

}  // namespace cgt

#include "cgt/rational.hpp"

#include <cmath>
#include <cstdlib>

namespace cgt {

Rational parse_rational(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty rational literal");
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    BigInt num(s.substr(0, slash));
    BigInt den(s.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator: " + s);
    return Rational(num, den);
  }
  auto dot = s.find('.');
  if (dot == std::string::npos) return Rational(BigInt(s));
  std::string head = s.substr(0, dot);
  std::string frac = s.substr(dot + 1);
  for (char c : frac)
    if (c < '0' || c > '9') throw std::invalid_argument("bad rational literal: " + s);
  bool neg = !head.empty() && head[0] == '-';
  if (head == "-" || head.empty()) head = "0";
  BigInt ip(head);
  BigInt den = 1;
  for (size_t i = 0; i < frac.size(); ++i) den *= 10;
  BigInt num = boost::multiprecision::abs(ip) * den + (frac.empty() ? BigInt(0) : BigInt(frac));
  Rational r(num, den);
  return neg || ip < 0 ? -r : r;
}

Rational rational_from_double(double d) {
  if (!std::isfinite(d)) throw std::invalid_argument("non-finite double");
  if (d == 0.0) return Rational(0);
  int exp = 0;
  double m = std::frexp(d, &exp);  // d = m * 2^exp, |m| in [0.5, 1)
  // 53 doublings make the mantissa integral.
  BigInt num(static_cast<int64_t>(std::ldexp(m, 53)));
  exp -= 53;
  if (exp >= 0) return Rational(num << exp, 1);
  return Rational(num, BigInt(1) << -exp);
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

std::string rational_to_string(const Rational& r) {
  BigInt num = boost::multiprecision::numerator(r);
  BigInt den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  BigInt d = den;
  int twos = 0, fives = 0;
  while (d % 2 == 0) { d /= 2; ++twos; }
  while (d % 5 == 0) { d /= 5; ++fives; }
  if (d != 1) return num.str() + "/" + den.str();
  int digits = std::max(twos, fives);
  BigInt scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  BigInt scaled = num * scale / den;
  bool neg = scaled < 0;
  std::string body = BigInt(boost::multiprecision::abs(scaled)).str();
  if (static_cast<int>(body.size()) <= digits) body.insert(0, digits + 1 - body.size(), '0');
  body.insert(body.size() - digits, ".");
  return (neg ? "-" : "") + body;
}

}  // namespace cgt
